"""Pluggable circuit evaluation with a content-addressed result cache.

Two evaluator kinds sit behind one interface: a SPICE subprocess runner
(batch-mode ngspice against rendered decks) and the analytic surrogate
bench. Results are cached by a key derived from config content, design
identity and evaluator settings, one file per key under
``results_dir/cache/``, so repeated trials reuse simulations. Cache hits
cost zero budget; failed simulations count against it (they cost real
simulator time).

Surrogate evaluations record a wall time of 0.0: they are effectively
free, and a fixed value keeps batch results field-for-field identical
whatever the worker count.
"""

from __future__ import annotations

import hashlib
import json
import os
import random
import re
import shutil
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from .config import BenchmarkConfig, render_deck
from .core import (
    Design,
    EvaluatedDesign,
    FOM_METRIC,
    METRIC_MISSING,
    SIM_FAILED,
    SIM_OK,
    assess,
)
from .errors import EvaluatorUnavailable, UnknownModel
from .specexpr import SpecExpr, parse_spec, split_directions
from .surrogates import get_model

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
# print-style and meas-style lines share one shape: name, optional index
# decoration, '=', number. Case-insensitive, last occurrence wins.
_METRIC_LINE = re.compile(
    rf"^\s*([A-Za-z_][A-Za-z0-9_]*)(?:\[\d+\])?\s*=\s*({_NUMBER})\s*$",
    re.MULTILINE,
)


@dataclass(frozen=True)
class EvaluatorSpec:
    kind: str  # "spice" | "surrogate"
    executable: str = "ngspice"
    timeout_s: float = 60.0
    workdir: Optional[str] = None
    corner: str = "tt"
    model_id: Optional[str] = None
    noise: float = 0.0

    def canonical(self) -> str:
        if self.kind == "surrogate":
            return f"surrogate:{self.model_id}:noise={self.noise!r}"
        return f"spice:{self.executable}:corner={self.corner}"

    def __post_init__(self):
        if self.kind not in ("spice", "surrogate"):
            raise ValueError(f"unknown evaluator kind {self.kind!r}")
        if self.timeout_s <= 0:
            raise ValueError("timeout must be positive")
        if self.kind == "surrogate" and not self.model_id:
            raise UnknownModel("surrogate evaluator needs a model id")


def evaluator_from_config(config: BenchmarkConfig) -> EvaluatorSpec:
    """Default evaluator for a config: the passthrough `evaluator` key
    selects the surrogate bench, otherwise SPICE."""
    if config.passthrough.get("evaluator") == "surrogate":
        model_id = config.passthrough.get("surrogate_model")
        return EvaluatorSpec(kind="surrogate", model_id=str(model_id))
    return EvaluatorSpec(kind="spice")


@dataclass(frozen=True)
class MetricScrape:
    values: Dict[str, float]
    raw_log: str
    missing: List[str]


def scrape_metrics(log: str, expected: Sequence[str]) -> MetricScrape:
    """Pull `name = number` metric lines out of a simulator log.

    Metric names match case-insensitively and the last occurrence wins;
    numbers are plain-exponent form (ngspice batch output), engineering
    suffixes are not parsed. Absent metrics land in ``missing``, never
    raise.
    """
    found: Dict[str, float] = {}
    wanted = {name.lower(): name for name in expected}
    for match in _METRIC_LINE.finditer(log):
        name = match.group(1).lower()
        if name in wanted:
            found[wanted[name]] = float(match.group(2))
    missing = [name for name in expected if name not in found]
    return MetricScrape(values=found, raw_log=log, missing=missing)


def surrogate_eval(model_id: str, assignment: Mapping[str, float],
                   noise: float = 0.0) -> Dict[str, float]:
    """Closed-form metrics for one assignment; pure and deterministic.

    Nonzero noise perturbs each metric with a gaussian seeded by the
    design content, so results stay reproducible across processes.
    """
    model = get_model(model_id)
    metrics = model.metrics_for(assignment)
    if noise > 0:
        from .core import design_from

        rng = random.Random(design_from(assignment).id)
        metrics = {k: v * (1.0 + noise * rng.gauss(0.0, 1.0)) for k, v in metrics.items()}
    return metrics


class ResultCache:
    """Content-addressed store of scrape outcomes.

    Values are deterministic per key, so concurrent writers are benign:
    last writer wins with identical bytes. ``directory=None`` keeps the
    cache purely in memory.
    """

    def __init__(self, directory: Optional[str] = None):
        self.directory = Path(directory) if directory else None
        if self.directory:
            self.directory.mkdir(parents=True, exist_ok=True)
        self._memory: Dict[str, dict] = {}

    @staticmethod
    def key_for(config: BenchmarkConfig, design: Design, evaluator: EvaluatorSpec) -> str:
        payload = "\n".join((config.fingerprint_text(), design.id, evaluator.canonical()))
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()

    def get(self, key: str) -> Optional[dict]:
        if key in self._memory:
            return self._memory[key]
        if self.directory:
            path = self.directory / f"{key}.json"
            if path.exists():
                try:
                    entry = json.loads(path.read_text(encoding="utf-8"))
                except (OSError, json.JSONDecodeError):
                    return None
                self._memory[key] = entry
                return entry
        return None

    def put(self, key: str, entry: dict) -> None:
        self._memory[key] = entry
        if self.directory:
            path = self.directory / f"{key}.json"
            tmp = path.with_suffix(".tmp")
            tmp.write_text(json.dumps(entry, sort_keys=True), encoding="utf-8")
            os.replace(tmp, path)


def _core_metric_names(config: BenchmarkConfig) -> List[str]:
    return [m for m in config.metrics if m != FOM_METRIC]


def _run_spice(config: BenchmarkConfig, design: Design,
               evaluator: EvaluatorSpec, keep_log_dir: Optional[Path]) -> Tuple[dict, float]:
    """One simulator invocation; returns (cache entry, wall seconds)."""
    deck = render_deck(config, design.assignment)
    started = time.perf_counter()
    workdir = evaluator.workdir or tempfile.gettempdir()
    deck_path = None
    try:
        fd, deck_path = tempfile.mkstemp(
            prefix=f"deck_{design.id}_", suffix=".sp", dir=workdir
        )
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(deck.testbench_text)
        proc = subprocess.run(
            [evaluator.executable, "-b", deck_path],
            capture_output=True,
            text=True,
            timeout=evaluator.timeout_s,
        )
        raw_log = proc.stdout + "\n" + proc.stderr
        status = SIM_OK if proc.returncode == 0 else SIM_FAILED
        reason = "" if proc.returncode == 0 else f"exit status {proc.returncode}"
    except subprocess.TimeoutExpired as exc:
        raw_log = ((exc.stdout or b"").decode("utf-8", "replace")
                   if isinstance(exc.stdout, bytes) else (exc.stdout or ""))
        status = SIM_FAILED
        reason = "timeout"
    finally:
        if deck_path and os.path.exists(deck_path):
            os.unlink(deck_path)
    elapsed = time.perf_counter() - started

    values: Dict[str, float] = {}
    if status == SIM_OK:
        scrape = scrape_metrics(raw_log, config.metrics)
        values = scrape.values
        if any(m in scrape.missing for m in _core_metric_names(config)):
            status = METRIC_MISSING
            reason = f"missing metrics: {[m for m in scrape.missing if m != FOM_METRIC]}"
    if keep_log_dir:
        keep_log_dir.mkdir(parents=True, exist_ok=True)
        (keep_log_dir / f"{design.id}.log").write_text(raw_log, encoding="utf-8")
    return {"raw_metrics": values, "sim_status": status, "reason": reason}, elapsed


def _evaluate_one(config, design, evaluator, keep_log_dir):
    if evaluator.kind == "surrogate":
        metrics = surrogate_eval(evaluator.model_id, design.assignment, evaluator.noise)
        return {"raw_metrics": metrics, "sim_status": SIM_OK, "reason": ""}, 0.0
    return _run_spice(config, design, evaluator, keep_log_dir)


def evaluate_batch(
    config: BenchmarkConfig,
    designs: Sequence[Design],
    evaluator: EvaluatorSpec,
    *,
    spec: Optional[SpecExpr] = None,
    cache: Optional[ResultCache] = None,
    start_eval_index: int = 1,
    iteration: int = 0,
    method: str = "",
    workers: int = 1,
    keep_logs: bool = False,
    results_dir: Optional[str] = None,
) -> List[EvaluatedDesign]:
    """Evaluate a batch of designs, preserving input order in the output.

    Cache hits (including a duplicate design later in the same batch)
    are marked ``cached`` and carry zero wall time; only the first
    occurrence runs. Individual failures become ``sim_failed`` records
    and never abort the batch. A missing SPICE executable aborts up
    front with EvaluatorUnavailable.
    """
    if evaluator.kind == "spice" and shutil.which(evaluator.executable) is None:
        raise EvaluatorUnavailable(
            f"spice executable {evaluator.executable!r} not found on PATH; "
            "install it or select the surrogate evaluator"
        )
    if spec is None:
        spec = parse_spec(config.user_specs_metric)
    cache = cache if cache is not None else ResultCache(None)
    keep_log_dir = Path(results_dir) / "logs" if (keep_logs and results_dir) else None

    keys = [ResultCache.key_for(config, d, evaluator) for d in designs]
    # first occurrence of each key computes; later ones are in-batch hits
    first_slot: Dict[str, int] = {}
    todo: List[int] = []
    hit: List[bool] = []
    for i, key in enumerate(keys):
        if cache.get(key) is not None:
            hit.append(True)
        elif key in first_slot:
            hit.append(True)
        else:
            first_slot[key] = i
            todo.append(i)
            hit.append(False)

    fresh_results: Dict[int, Tuple[dict, float]] = {}
    if todo:
        if workers > 1 and len(todo) > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futures = {
                    i: pool.submit(_evaluate_one, config, designs[i], evaluator, keep_log_dir)
                    for i in todo
                }
                for i, future in futures.items():
                    fresh_results[i] = future.result()
        else:
            for i in todo:
                fresh_results[i] = _evaluate_one(config, designs[i], evaluator, keep_log_dir)
        for i in todo:
            cache.put(keys[i], fresh_results[i][0])

    records: List[EvaluatedDesign] = []
    for i, design in enumerate(designs):
        entry = cache.get(keys[i])
        wall = 0.0 if hit[i] else fresh_results[i][1]
        raw = dict(entry["raw_metrics"])
        status = entry["sim_status"]
        if status == SIM_OK:
            fom, feasible, normalized = assess(spec, raw)
        else:
            fom, feasible, normalized = None, False, {}
        records.append(
            EvaluatedDesign(
                design=design,
                raw_metrics=raw,
                normalized=normalized,
                fom=fom,
                feasible=feasible,
                sim_status=status,
                iteration=iteration,
                method=method,
                eval_index=start_eval_index + i,
                wall_time=wall,
                cached=hit[i],
            )
        )
    return records
