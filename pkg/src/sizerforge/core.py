"""Figure-of-merit computation, feasibility, design identity and history.

The scalar objective is the product of normalized maximize-metrics over
the product of normalized minimize-metrics, each normalized by its
specification target. A failed figure of merit (any normalized value
non-positive or non-finite, or a zero denominator) is represented by
``None`` throughout the package; ``None`` orders below every finite
value and never poisons statistics.

A metric literally named ``fom`` may appear in the user specification as
a feasibility clause, but it is never an input to the objective's
products: the engine recomputes the figure of merit from the base
metrics. If a simulator log also reports one, the engine's value wins
and a disagreement above 1% logs a warning.
"""

from __future__ import annotations

import hashlib
import json
import math
import logging
import threading
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .errors import EmptyHistory, InsufficientHistory, MissingMetric, NoValidDesign
from .specexpr import Comparison, SpecExpr, evaluate_spec, split_directions

log = logging.getLogger(__name__)

SIM_OK = "ok"
SIM_FAILED = "sim_failed"
METRIC_MISSING = "metric_missing"

# Metric name reserved for the engine-computed objective. Excluded from
# the objective's own products to prevent self-reference.
FOM_METRIC = "fom"


@dataclass(frozen=True, eq=False)
class Design:
    """One point of the design grid: a full variable assignment plus a
    content hash that serves as identity for caching and dedup."""

    assignment: Mapping[str, float]
    id: str

    def __eq__(self, other):
        return isinstance(other, Design) and self.id == other.id

    def __hash__(self):
        return hash(self.id)

    def __repr__(self):
        inner = ", ".join(f"{k}={v!r}" for k, v in sorted(self.assignment.items()))
        return f"Design({inner})"


def design_from(assignment: Mapping[str, float]) -> Design:
    """Build a Design with a canonical content id.

    The id hashes the assignment sorted by variable name, so semantically
    equal assignments always share an id regardless of insertion order.
    """
    canon = ",".join(f"{k}={v!r}" for k, v in sorted(assignment.items()))
    digest = hashlib.sha1(canon.encode("utf-8")).hexdigest()[:12]
    return Design(dict(assignment), digest)


@dataclass(frozen=True)
class EvaluatedDesign:
    design: Design
    raw_metrics: Mapping[str, float]
    normalized: Mapping[str, float]
    fom: Optional[float]
    feasible: bool
    sim_status: str
    iteration: int
    method: str
    eval_index: int  # global 1-based ordinal, dense
    wall_time: float
    cached: bool = False

    def to_record(self) -> dict:
        return {
            "eval_index": self.eval_index,
            "design_id": self.design.id,
            "assignment": dict(self.design.assignment),
            "raw_metrics": dict(self.raw_metrics),
            "normalized": dict(self.normalized),
            "fom": self.fom,
            "feasible": self.feasible,
            "sim_status": self.sim_status,
            "iteration": self.iteration,
            "method": self.method,
            "wall_time": self.wall_time,
            "cached": self.cached,
        }


@dataclass(frozen=True)
class IterationSummary:
    iteration: int
    method: str
    n_samples: int
    best_fom_so_far: Optional[float]
    improvement_pct: Optional[float]

    def to_record(self) -> dict:
        return asdict(self)


class History:
    """Append-only record of all evaluations plus per-iteration summaries.

    Appends go through one lock so a parallel batch evaluator can merge
    results safely; readers always see a consistent prefix.
    """

    def __init__(self):
        self.records: List[EvaluatedDesign] = []
        self.iteration_summaries: List[IterationSummary] = []
        self.dedupe_index: Dict[str, int] = {}
        self._lock = threading.Lock()

    def __len__(self):
        return len(self.records)

    def append(self, record: EvaluatedDesign) -> None:
        with self._lock:
            expected = len(self.records) + 1
            if record.eval_index != expected:
                raise ValueError(
                    f"eval_index must be dense: got {record.eval_index}, expected {expected}"
                )
            self.records.append(record)
            self.dedupe_index.setdefault(record.design.id, record.eval_index)

    def append_batch(self, records: Sequence[EvaluatedDesign]) -> None:
        for r in records:
            self.append(r)

    def add_summary(self, summary: IterationSummary) -> None:
        with self._lock:
            if self.iteration_summaries:
                prev = self.iteration_summaries[-1].best_fom_so_far
                cur = summary.best_fom_so_far
                if prev is not None and (cur is None or cur < prev):
                    raise ValueError("best_fom_so_far must be non-decreasing")
            self.iteration_summaries.append(summary)

    def next_eval_index(self) -> int:
        return len(self.records) + 1

    def contains_design(self, design_id: str) -> bool:
        return design_id in self.dedupe_index

    def valid_records(self) -> List[EvaluatedDesign]:
        return [r for r in self.records if r.sim_status == SIM_OK and r.fom is not None]

    def to_jsonl(self) -> str:
        lines = [json.dumps({"kind": "evaluation", **r.to_record()}, sort_keys=True)
                 for r in self.records]
        lines += [json.dumps({"kind": "summary", **s.to_record()}, sort_keys=True)
                  for s in self.iteration_summaries]
        return "\n".join(lines) + ("\n" if lines else "")


def compute_fom(
    maximize: Sequence[Comparison],
    minimize: Sequence[Comparison],
    raw_metrics: Mapping[str, float],
) -> Optional[float]:
    """Normalized product objective; ``None`` marks a failed value.

    Each metric is normalized by its clause threshold. Any normalized
    value <= 0 or non-finite fails, as does a zero denominator; negative
    raw metrics therefore fail rather than producing a signed objective.
    """
    numerator = 1.0
    for clause in maximize:
        if clause.metric not in raw_metrics:
            raise MissingMetric(clause.metric)
        if clause.threshold == 0:
            return None
        normalized = raw_metrics[clause.metric] / clause.threshold
        if not math.isfinite(normalized) or normalized <= 0:
            return None
        numerator *= normalized
    denominator = 1.0
    for clause in minimize:
        if clause.metric not in raw_metrics:
            raise MissingMetric(clause.metric)
        if clause.threshold == 0:
            return None
        normalized = raw_metrics[clause.metric] / clause.threshold
        if not math.isfinite(normalized) or normalized <= 0:
            return None
        denominator *= normalized
    if denominator == 0:
        return None
    value = numerator / denominator
    if not math.isfinite(value):
        return None
    return value


def assess(
    spec: SpecExpr, raw_metrics: Mapping[str, float]
) -> Tuple[Optional[float], bool, Dict[str, float]]:
    """Compose direction split + objective + feasibility.

    Returns (fom, feasible, normalized). Feasibility follows the user's
    literal expression, evaluated on the raw metrics with the engine's
    objective value standing in for the ``fom`` clause when present.
    """
    maximize, minimize = split_directions(spec)
    fom_max = tuple(c for c in maximize if c.metric != FOM_METRIC)
    fom_min = tuple(c for c in minimize if c.metric != FOM_METRIC)
    try:
        fom = compute_fom(fom_max, fom_min, raw_metrics)
    except MissingMetric:
        return None, False, {}

    spec_metrics = dict(raw_metrics)
    if any(c.metric == FOM_METRIC for c in spec.clauses):
        if FOM_METRIC in raw_metrics and fom is not None:
            reported = raw_metrics[FOM_METRIC]
            if reported != 0 and abs(reported - fom) / abs(reported) > 0.01:
                log.warning(
                    "engine fom %.6g disagrees with reported fom %.6g by more than 1%%",
                    fom,
                    reported,
                )
        if fom is None:
            return None, False, {}
        spec_metrics[FOM_METRIC] = fom

    if fom is None:
        return None, False, {}

    try:
        verdict = evaluate_spec(spec, spec_metrics)
    except MissingMetric:
        return fom, False, {}

    normalized = {}
    for clause in spec.clauses:
        if clause.threshold != 0:
            normalized[clause.metric] = spec_metrics[clause.metric] / clause.threshold
    return fom, verdict.passed, normalized


def _fom_key(record: EvaluatedDesign) -> float:
    return record.fom if record.fom is not None else float("-inf")


def best_so_far(history: History) -> Tuple[EvaluatedDesign, int]:
    """Best valid record and the eval index that first attained its value.

    Failed values rank below every finite value; ties break to the
    earliest eval index, so the returned record is the first attaining
    one and ``evals_to_best`` is simply its 1-based ordinal.
    """
    if not history.records:
        raise EmptyHistory("history has no records")
    valid = history.valid_records()
    if not valid:
        raise NoValidDesign("no record with a valid figure of merit")
    best_value = max(r.fom for r in valid)
    for record in valid:
        if record.fom == best_value:
            return record, record.eval_index
    raise AssertionError("unreachable")


def improvement_pct(history: History, window: int = 1) -> float:
    """Relative improvement of best-so-far over the last ``window`` summaries.

    With a zero (or undefined) reference the value degenerates to +inf
    when the current best is positive, else 0.
    """
    summaries = history.iteration_summaries
    if window < 1 or len(summaries) < window + 1:
        raise InsufficientHistory(
            f"need at least {window + 1} iteration summaries, have {len(summaries)}"
        )
    now = summaries[-1].best_fom_so_far
    ago = summaries[-1 - window].best_fom_so_far
    if now is None:
        return 0.0
    if ago is None or ago == 0:
        return math.inf if now > 0 else 0.0
    return 100.0 * (now - ago) / abs(ago)
