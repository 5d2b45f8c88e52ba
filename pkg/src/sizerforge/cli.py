"""Command line entry points.

Subcommands: run (one sizing run), bench (a trial matrix), report
(re-render saved results), validate (check a config renders and
parses), oracle (print a surrogate model's certified optimum).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .agents import make_backend
from .config import load_config, render_deck
from .controller import BASELINE_ALGORITHMS, RunBudget, run, run_baseline
from .errors import ConfigError, SizerForgeError
from .evaluation import EvaluatorSpec, evaluator_from_config
from .harness import load_matrix, render_table, run_matrix
from .specexpr import parse_spec
from .surrogates import enumerate_oracle, get_model


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sizerforge")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one sizing optimization")
    p_run.add_argument("config")
    p_run.add_argument("--backend", default="rule",
                       help="rule | llm | replay:DIR (default rule)")
    p_run.add_argument("--method", default="autosizer",
                       choices=("autosizer",) + BASELINE_ALGORITHMS,
                       help="two-loop autosizer or a single-loop baseline")
    p_run.add_argument("--budget", type=int, default=300)
    p_run.add_argument("--inner-cap", type=int, default=100)
    p_run.add_argument("--outer-cap", type=int, default=3)
    p_run.add_argument("--seed", type=int, default=0)
    p_run.add_argument("--evaluator", choices=("spice", "surrogate"),
                       help="override the config's evaluator")
    p_run.add_argument("--workers", type=int, default=1)
    p_run.add_argument("--keep-logs", action="store_true")
    p_run.add_argument("--results-dir", help="write artifacts under this directory")
    p_run.add_argument("--no-cu", action="store_true",
                       help="ablation: generic circuit understanding")
    p_run.add_argument("--no-ssd", action="store_true",
                       help="ablation: search the full grid, skip planning")
    p_run.add_argument("--no-oe", action="store_true",
                       help="ablation: plain lhs batches instead of method orchestration")
    p_run.add_argument("--no-srl", action="store_true",
                       help="ablation: a single outer loop")

    p_bench = sub.add_parser("bench", help="run a circuits x methods trial matrix")
    p_bench.add_argument("matrix")
    p_bench.add_argument("--out", help="write reports and per-trial artifacts here")
    p_bench.add_argument("--workers", type=int, default=1)

    p_report = sub.add_parser("report", help="re-render reports from a results directory")
    p_report.add_argument("results_dir")

    p_val = sub.add_parser("validate", help="check a config parses and renders")
    p_val.add_argument("config")

    p_oracle = sub.add_parser("oracle", help="print a surrogate model's certified optimum")
    p_oracle.add_argument("model_id")
    return parser


def _evaluator_override(config, choice):
    if choice is None:
        return None
    base = evaluator_from_config(config)
    if choice == "spice":
        return dataclasses.replace(base, kind="spice")
    model_id = base.model_id or config.passthrough.get("surrogate_model")
    if not model_id:
        raise ConfigError(
            "--evaluator surrogate needs a surrogate_model key in the config"
        )
    return dataclasses.replace(base, kind="surrogate", model_id=str(model_id))


def _fmt_assignment(assignment) -> str:
    return ", ".join(f"{k}={v:g}" for k, v in assignment.items())


def cmd_run(args) -> int:
    config = load_config(args.config)
    budget = RunBudget(
        total_evals=args.budget,
        per_inner_loop=args.inner_cap,
        max_outer_loops=args.outer_cap,
    )
    evaluator = _evaluator_override(config, args.evaluator)
    if args.method in BASELINE_ALGORITHMS:
        result = run_baseline(
            config, args.method, budget, args.seed,
            evaluator=evaluator, workers=args.workers,
            keep_logs=args.keep_logs, results_dir=args.results_dir,
        )
    else:
        backend = make_backend(args.backend)
        result = run(
            config, budget, backend, args.seed,
            evaluator=evaluator, workers=args.workers,
            keep_logs=args.keep_logs, results_dir=args.results_dir,
            no_cu=args.no_cu, no_ssd=args.no_ssd,
            no_oe=args.no_oe, no_srl=args.no_srl,
        )

    print(f"outcome: {result.outcome}")
    if result.best is not None:
        print(f"best FoM {result.best.fom:.6f} at {_fmt_assignment(result.best.design.assignment)}")
        metrics = ", ".join(f"{k}={v:.6g}" for k, v in result.best.raw_metrics.items())
        print(f"metrics: {metrics}")
    else:
        print("no valid design found")
    print(
        f"feasible: {'yes' if result.feasible_found else 'no'} | "
        f"evals: {result.evals_used}/{budget.total_evals} | "
        f"loops: {result.outer_loops_used} | "
        f"generations: {len(result.space_generations)} | "
        f"wall: {result.wall_time:.2f}s"
    )
    if args.results_dir:
        print(f"artifacts: {args.results_dir}")
    return 0


def cmd_bench(args) -> int:
    matrix = load_matrix(args.matrix)
    report = run_matrix(matrix, out_dir=args.out, workers=args.workers)
    sys.stdout.write(render_table(report))
    if args.out:
        print(f"reports: {Path(args.out) / 'reports'}")
    return 0


def cmd_report(args) -> int:
    root = Path(args.results_dir)
    for candidate in (root / "reports" / "matrix_results.json", root / "matrix_results.json"):
        if candidate.exists():
            report = json.loads(candidate.read_text())
            sys.stdout.write(render_table(report))
            return 0
    single = root / "result.json"
    if single.exists():
        record = json.loads(single.read_text())
        print(json.dumps(record, indent=2, sort_keys=True))
        return 0
    print(f"no matrix_results.json or result.json under {root}", file=sys.stderr)
    return 2


def cmd_validate(args) -> int:
    config = load_config(args.config)
    spec = parse_spec(config.user_specs_metric)
    # midpoint assignment: every template slot must resolve
    assignment = {v: config.grid_for(v)[len(config.grid_for(v)) // 2] for v in config.variables}
    render_deck(config, assignment)
    print(f"config: {config.name}")
    print(f"variables: {', '.join(config.variables)}")
    print(f"grid: {len(config.w_values)} values per variable, "
          f"{config.full_grid_cardinality()} combinations")
    print(f"metrics: {', '.join(config.metrics)}")
    print(f"spec clauses: {len(spec.clauses)}")
    print("templates render cleanly")
    print("OK")
    return 0


def cmd_oracle(args) -> int:
    model = get_model(args.model_id)
    result = enumerate_oracle(model)
    record = {"model": model.id, **result.to_record()}
    print(json.dumps(record, indent=2, sort_keys=True))
    return 0


_COMMANDS = {
    "run": cmd_run,
    "bench": cmd_bench,
    "report": cmd_report,
    "validate": cmd_validate,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except SizerForgeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
