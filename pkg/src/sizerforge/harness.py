"""Trial orchestration: circuits x methods x seeded trials.

A matrix file names circuits (config paths) and methods, and each cell
runs trials_per_cell seeded trials through the controller. Summaries
follow the usual benchmark table shape: FoM, evaluations and wall time
as mean +/- std over the trials that produced a result, and a success
rate over all trials, where a crashed trial counts as a failure.

The success rate is recomputed here from each trial's best raw metrics
via evaluate_spec; the controller's own feasibility flag is never
trusted for reporting.
"""

from __future__ import annotations

import csv
import io
import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import yaml

from .agents import make_backend
from .config import BenchmarkConfig, load_config
from .controller import BASELINE_ALGORITHMS, RunBudget, RunResult, run, run_baseline
from .errors import ConfigError
from .specexpr import evaluate_spec, parse_spec

DEFAULT_TRIALS = 3


@dataclass(frozen=True)
class TrialMatrix:
    circuits: List[str]
    methods: List[str]
    trials_per_cell: int = DEFAULT_TRIALS
    seeds: Optional[List[int]] = None  # explicit; else base_seed + index
    base_seed: int = 0
    budget: RunBudget = field(default_factory=RunBudget)

    def seed_list(self) -> List[int]:
        if self.seeds is not None:
            return list(self.seeds)
        return [self.base_seed + i for i in range(self.trials_per_cell)]


@dataclass
class CellSummary:
    fom_mean: Optional[float]
    fom_std: Optional[float]
    evals_mean: Optional[float]
    evals_std: Optional[float]
    time_mean_s: Optional[float]
    time_std_s: Optional[float]
    sr_pct: float
    n_trials: int
    n_valid: int

    def to_record(self) -> dict:
        return {
            "fom_mean": self.fom_mean,
            "fom_std": self.fom_std,
            "evals_mean": self.evals_mean,
            "evals_std": self.evals_std,
            "time_mean_s": self.time_mean_s,
            "time_std_s": self.time_std_s,
            "sr_pct": self.sr_pct,
            "n_trials": self.n_trials,
            "n_valid": self.n_valid,
        }


def parse_matrix(source: str) -> TrialMatrix:
    """Matrix files share the config document format: one YAML mapping."""
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"matrix file is not valid YAML: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError("matrix file must be a YAML mapping")

    circuits = doc.get("circuits")
    methods = doc.get("methods")
    if not circuits or not isinstance(circuits, list):
        raise ConfigError("matrix needs a non-empty 'circuits' list")
    if not methods or not isinstance(methods, list):
        raise ConfigError("matrix needs a non-empty 'methods' list")
    for m in methods:
        _check_method(str(m))

    trials = int(doc.get("trials_per_cell", DEFAULT_TRIALS))
    if trials < 1:
        raise ConfigError("trials_per_cell must be at least 1")
    seeds = doc.get("seeds")
    if seeds is not None:
        seeds = [int(s) for s in seeds]
        if len(seeds) != trials:
            raise ConfigError(
                f"seeds length {len(seeds)} must equal trials_per_cell {trials}"
            )
    raw_budget = doc.get("budget", {})
    if not isinstance(raw_budget, dict):
        raise ConfigError("'budget' must be a mapping")
    budget = RunBudget(
        total_evals=int(raw_budget.get("total_evals", 300)),
        per_inner_loop=int(raw_budget.get("per_inner_loop", 100)),
        max_outer_loops=int(raw_budget.get("max_outer_loops", 3)),
        wall_clock_limit_s=raw_budget.get("wall_clock_limit_s"),
    )
    return TrialMatrix(
        circuits=[str(c) for c in circuits],
        methods=[str(m) for m in methods],
        trials_per_cell=trials,
        seeds=seeds,
        base_seed=int(doc.get("base_seed", 0)),
        budget=budget,
    )


def load_matrix(path: str) -> TrialMatrix:
    return parse_matrix(Path(path).read_text())


def _check_method(method: str) -> None:
    if method in BASELINE_ALGORITHMS:
        return
    if method == "autosizer" or method.startswith("autosizer:"):
        return
    raise ConfigError(
        f"unknown method {method!r}; use autosizer[:backend] or one of {BASELINE_ALGORITHMS}"
    )


def _run_trial(
    config: BenchmarkConfig,
    method: str,
    budget: RunBudget,
    seed: int,
    workers: int,
    results_dir: Optional[str],
) -> RunResult:
    if method in BASELINE_ALGORITHMS:
        return run_baseline(
            config, method, budget, seed, workers=workers, results_dir=results_dir
        )
    spec = method.split(":", 1)[1] if ":" in method else "rule"
    backend = make_backend(spec)  # fresh per trial: replay cursors are stateful
    return run(config, budget, backend, seed, workers=workers, results_dir=results_dir)


def _reported_design(result: RunResult, spec):
    """The design a trial hands back.

    A sizing run that reached a satisfying design reports its best such
    design; only a run that never met the spec falls back to the best
    by figure of merit (which can violate individual clauses). Spec
    satisfaction is recomputed clause by clause from raw metrics here.
    """
    feasible = [
        r for r in result.history.valid_records()
        if evaluate_spec(spec, r.raw_metrics).passed
    ]
    if feasible:
        # highest FoM; earliest evaluation on ties
        return max(feasible, key=lambda r: (r.fom, -r.eval_index))
    return result.best


def _trajectory(result: RunResult) -> List[tuple]:
    rows = []
    best = None
    for record in result.history.records:
        if record.fom is not None and (best is None or record.fom > best):
            best = record.fom
        rows.append((record.eval_index, best))
    return rows


def _space_ranges(result: RunResult) -> List[tuple]:
    rows = []
    for space in result.space_generations:
        for var in space.full_grid:
            if var in space.active:
                values = space.active[var]
                rows.append((space.generation, var, min(values), max(values), False))
            else:
                pinned = space.fixed[var]
                rows.append((space.generation, var, pinned, pinned, True))
    return rows


def _summarize(trials: List[dict]) -> CellSummary:
    valid = [t for t in trials if t["ok"] and t["fom"] is not None]

    def stats(key):
        xs = [t[key] for t in valid]
        if not xs:
            return None, None
        return statistics.fmean(xs), statistics.pstdev(xs)

    fom_mean, fom_std = stats("fom")
    evals_mean, evals_std = stats("evals")
    time_mean, time_std = stats("time_s")
    feasible = sum(1 for t in trials if t["feasible"])
    return CellSummary(
        fom_mean=fom_mean,
        fom_std=fom_std,
        evals_mean=evals_mean,
        evals_std=evals_std,
        time_mean_s=time_mean,
        time_std_s=time_std,
        sr_pct=100.0 * feasible / len(trials),
        n_trials=len(trials),
        n_valid=len(valid),
    )


def run_matrix(
    matrix: TrialMatrix,
    *,
    out_dir: Optional[str] = None,
    workers: int = 1,
) -> dict:
    """Execute every cell x trial. Per-trial failures are recorded, never raised."""
    seeds = matrix.seed_list()
    cells = []
    for circuit_path in matrix.circuits:
        config = load_config(circuit_path)
        spec = parse_spec(config.user_specs_metric)
        for method in matrix.methods:
            trials = []
            for seed in seeds:
                trial = {
                    "circuit": config.name,
                    "config": circuit_path,
                    "method": method,
                    "seed": seed,
                    "ok": False,
                    "error": None,
                    "fom": None,
                    "evals": 0,
                    "time_s": 0.0,
                    "feasible": False,
                    "outcome": None,
                    "best_assignment": None,
                    "best_raw_metrics": None,
                    "trajectory": [],
                    "space_ranges": [],
                }
                trial_dir = None
                if out_dir:
                    slug = f"{config.name}__{method.replace(':', '-')}__s{seed}"
                    trial_dir = str(Path(out_dir) / "trials" / slug)
                try:
                    result = _run_trial(config, method, matrix.budget, seed, workers, trial_dir)
                except Exception as exc:  # a broken cell must not sink the matrix
                    trial["error"] = f"{type(exc).__name__}: {exc}"
                    trials.append(trial)
                    continue
                trial["ok"] = True
                trial["evals"] = result.evals_used
                trial["time_s"] = result.wall_time
                trial["outcome"] = result.outcome
                trial["trajectory"] = _trajectory(result)
                trial["space_ranges"] = _space_ranges(result)
                reported = _reported_design(result, spec)
                if reported is not None:
                    trial["fom"] = reported.fom
                    trial["best_assignment"] = dict(reported.design.assignment)
                    raw = dict(reported.raw_metrics)
                    trial["best_raw_metrics"] = raw
                    # success is recomputed from the raw metrics, not taken
                    # from the run result
                    trial["feasible"] = evaluate_spec(spec, raw).passed
                trials.append(trial)
            cells.append(
                {
                    "circuit": config.name,
                    "config": circuit_path,
                    "method": method,
                    "summary": _summarize(trials).to_record(),
                    "trials": trials,
                }
            )
    report = {
        "matrix": {
            "circuits": list(matrix.circuits),
            "methods": list(matrix.methods),
            "trials_per_cell": matrix.trials_per_cell,
            "seeds": seeds,
            "budget": {
                "total_evals": matrix.budget.total_evals,
                "per_inner_loop": matrix.budget.per_inner_loop,
                "max_outer_loops": matrix.budget.max_outer_loops,
                "wall_clock_limit_s": matrix.budget.wall_clock_limit_s,
            },
        },
        "cells": cells,
    }
    if out_dir:
        emit_reports(report, out_dir)
    return report


def _fmt_pm(mean: Optional[float], std: Optional[float], digits: int) -> str:
    if mean is None:
        return "n/a"
    return f"{mean:.{digits}f} ± {std:.{digits}f}"


def render_table(report: dict) -> str:
    """Text table in the usual benchmark layout: FoM, Evals, Time, SR%."""
    headers = ["circuit", "method", "FOM", "Evals", "Time (s)", "SR%"]
    rows = []
    for cell in report["cells"]:
        s = cell["summary"]
        rows.append(
            [
                cell["circuit"],
                cell["method"],
                _fmt_pm(s["fom_mean"], s["fom_std"], 4),
                _fmt_pm(s["evals_mean"], s["evals_std"], 1),
                _fmt_pm(s["time_mean_s"], s["time_std_s"], 2),
                f"{s['sr_pct']:.1f}",
            ]
        )
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h)
              for i, h in enumerate(headers)]
    lines = [
        "  ".join(h.ljust(widths[i]) for i, h in enumerate(headers)),
        "  ".join("-" * w for w in widths),
    ]
    for r in rows:
        lines.append("  ".join(r[i].ljust(widths[i]) for i in range(len(headers))))
    return "\n".join(lines) + "\n"


def emit_reports(report: dict, out_dir: str) -> List[str]:
    """Write the structured document, the text table, and plot data files."""
    root = Path(out_dir) / "reports"
    root.mkdir(parents=True, exist_ok=True)
    written = []

    results_path = root / "matrix_results.json"
    results_path.write_text(json.dumps(report, indent=2, sort_keys=True, default=float) + "\n")
    written.append(str(results_path))

    table_path = root / "matrix_table.txt"
    table_path.write_text(render_table(report))
    written.append(str(table_path))

    traj = io.StringIO()
    writer = csv.writer(traj)
    writer.writerow(["circuit", "method", "seed", "eval_index", "best_fom_so_far"])
    for cell in report["cells"]:
        for trial in cell["trials"]:
            for eval_index, best in trial["trajectory"]:
                writer.writerow(
                    [trial["circuit"], trial["method"], trial["seed"], eval_index,
                     "" if best is None else repr(best)]
                )
    traj_path = root / "trajectories.csv"
    traj_path.write_text(traj.getvalue())
    written.append(str(traj_path))

    ranges = io.StringIO()
    writer = csv.writer(ranges)
    writer.writerow(["circuit", "method", "seed", "generation", "variable", "min", "max", "fixed"])
    for cell in report["cells"]:
        for trial in cell["trials"]:
            for generation, var, lo, hi, fixed in trial["space_ranges"]:
                writer.writerow(
                    [trial["circuit"], trial["method"], trial["seed"], generation,
                     var, repr(lo), repr(hi), fixed]
                )
    ranges_path = root / "space_ranges.csv"
    ranges_path.write_text(ranges.getvalue())
    written.append(str(ranges_path))
    return written
