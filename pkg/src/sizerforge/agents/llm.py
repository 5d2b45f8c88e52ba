"""Model-backed decision layer: transport, transcripts, prompt rendering.

Each decision is a single prompt/response exchange. Responses go through
parse_agent_json plus op-specific validation (grid snapping, method and
variable-name checks); a rejected response earns exactly one retry with
the rejection reason echoed into the re-prompt, after which the rule
policy takes over. Transport failures take the same exit. A run never
aborts because the model misbehaved.

Transports share one interface, ``complete(prompt, params) -> text``:
HttpTransport speaks the common chat-completion JSON shape, configured
entirely from environment variables; ReplayTransport serves recorded
responses in file order, which makes runs reproducible offline and is
what the test suite uses.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from importlib import resources
from pathlib import Path
from typing import Callable, Dict, List, Mapping, Optional

import requests

from ..config import format_value, render_template
from ..core import History
from ..diagnostics import DiagnosticsReport, TOP_K, render_text, top_designs
from ..errors import (
    BadParameter,
    ConfigError,
    IllegalPlan,
    JsonUnparseable,
    LlmSchemaViolation,
    LlmTransport,
    PlanIncomplete,
    SchemaViolation,
    Timeout,
    UnknownMethod,
    ValueOffGrid,
)
from ..optim import MethodConfig, validate_method_config
from ..space import SearchSpace, first_round_from_plan, space_from_plan
from .rule import (
    BudgetState,
    rule_decide_inner,
    rule_decide_outer,
    rule_plan,
    rule_understand,
    target_metric,
)
from .schemas import (
    CircuitUnderstanding,
    InnerDecision,
    OuterDecision,
    SpacePlan,
    parse_agent_json,
)

ENV_URL = "SIZERFORGE_LLM_URL"
ENV_KEY = "SIZERFORGE_LLM_KEY"
ENV_MODEL = "SIZERFORGE_LLM_MODEL"

GENERATION_PARAMS: Dict[str, object] = {
    "temperature": 0.4,
    "top_p": 0.85,
    "top_k": 20,
    "max_tokens": 8192,
}

TRANSPORT_RETRIES = 2
BACKOFF_BASE_S = 1.0

_REJECTABLE = (
    JsonUnparseable,
    SchemaViolation,
    UnknownMethod,
    BadParameter,
    IllegalPlan,
    PlanIncomplete,
    ValueOffGrid,
)


def load_prompt(name: str) -> str:
    ref = resources.files("sizerforge.agents").joinpath(f"prompts/{name}.txt")
    return ref.read_text(encoding="utf-8")


# ------------------------------------------------------------- transports


class HttpTransport:
    """Chat-completion client configured from the environment.

    Missing configuration fails here, in the constructor, before any
    network activity. Transient failures are retried twice with
    exponential backoff; what cannot be retried away surfaces as
    LlmTransport or Timeout.
    """

    def __init__(
        self,
        url: Optional[str] = None,
        api_key: Optional[str] = None,
        model: Optional[str] = None,
        timeout_s: float = 120.0,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.url = url or os.environ.get(ENV_URL)
        self.api_key = api_key or os.environ.get(ENV_KEY)
        self.model = model or os.environ.get(ENV_MODEL)
        missing = [
            env
            for env, value in (
                (ENV_URL, self.url),
                (ENV_KEY, self.api_key),
                (ENV_MODEL, self.model),
            )
            if not value
        ]
        if missing:
            raise ConfigError(
                "llm transport is not configured; set " + ", ".join(missing)
            )
        self.timeout_s = timeout_s
        self._sleep = sleep

    def complete(self, prompt: str, params: Mapping[str, object]) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": "user", "content": prompt}],
            **params,
        }
        headers = {
            "Authorization": f"Bearer {self.api_key}",
            "Content-Type": "application/json",
        }
        last: Optional[Exception] = None
        for attempt in range(TRANSPORT_RETRIES + 1):
            if attempt:
                self._sleep(BACKOFF_BASE_S * 2 ** (attempt - 1))
            try:
                resp = requests.post(
                    self.url, json=payload, headers=headers, timeout=self.timeout_s
                )
            except requests.Timeout:
                last = Timeout(f"llm request timed out after {self.timeout_s:g}s")
                continue
            except requests.RequestException as exc:
                last = LlmTransport(0, str(exc))
                continue
            if resp.status_code != 200:
                last = LlmTransport(resp.status_code, resp.text or "")
                continue
            try:
                body = resp.json()
                return body["choices"][0]["message"]["content"]
            except (ValueError, LookupError, TypeError):
                last = LlmTransport(
                    resp.status_code, "malformed completion body: " + resp.text[:200]
                )
                continue
        raise last


class ReplayTransport:
    """Serves recorded responses in sorted file order; no network.

    Each file is one call's transcript: {"prompt", "params", "response"}.
    A retry consumes the next file, so recorded retry flows replay
    exactly. Running out of transcripts is a transport failure, which
    the backend turns into a rule fallback.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        if not self.directory.is_dir():
            raise ConfigError(f"replay directory not found: {directory}")
        self.files = sorted(
            p for p in self.directory.iterdir() if p.suffix == ".json"
        )
        self._cursor = 0

    def complete(self, prompt: str, params: Mapping[str, object]) -> str:
        if self._cursor >= len(self.files):
            raise LlmTransport(0, "replay transcript exhausted")
        path = self.files[self._cursor]
        self._cursor += 1
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
        except (OSError, ValueError) as exc:
            raise LlmTransport(0, f"unreadable transcript {path.name}: {exc}")
        response = record.get("response") if isinstance(record, dict) else None
        if not isinstance(response, str):
            raise LlmTransport(0, f"transcript {path.name} carries no response text")
        return response


class TranscriptWriter:
    """One JSON file per agent call: rendered prompt, params, raw response.

    File names sort in call order, so a transcript directory written
    here replays verbatim through ReplayTransport.
    """

    def __init__(self, directory):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self._count = 0

    def record(self, kind: str, prompt: str, params: Mapping[str, object], response: str) -> Path:
        self._count += 1
        path = self.directory / f"{self._count:04d}_{kind}.json"
        path.write_text(
            json.dumps(
                {"prompt": prompt, "params": dict(params), "response": response},
                indent=2,
            ),
            encoding="utf-8",
        )
        return path


# -------------------------------------------------------- grid repairs


def snap_to_grid(value: float, grid) -> float:
    # ties break toward the smaller grid value
    return min(grid, key=lambda g: (abs(g - value), g))


def snap_plan(plan: SpacePlan, config, log: Callable[[str], None]) -> SpacePlan:
    """Replace every off-grid plan value with its nearest grid value."""
    optimize = {}
    for var, entry in plan.optimize.items():
        grid = config.grid_for(var)
        values = []
        for value in entry["values"]:
            snapped = snap_to_grid(value, grid)
            if snapped != value:
                log(f"plan repair: {var} value {value!r} snapped to {snapped!r}")
            values.append(snapped)
        new_entry = dict(entry)
        new_entry["values"] = sorted(set(values))
        new_entry["num_choices"] = len(new_entry["values"])
        optimize[var] = new_entry
    fixed = {}
    for var, entry in plan.fixed.items():
        grid = config.grid_for(var)
        value = entry["value"]
        snapped = snap_to_grid(value, grid)
        if snapped != value:
            log(f"plan repair: {var} fixed value {value!r} snapped to {snapped!r}")
        new_entry = dict(entry)
        new_entry["value"] = snapped
        fixed[var] = new_entry
    return dataclasses.replace(plan, optimize=optimize, fixed=fixed)


def check_variable_names(plan: SpacePlan, config) -> None:
    """Reject plans that promote a permanently-fixed param to a variable."""
    allowed = set(config.variables)
    for section, names in (
        ("variables_to_optimize", plan.optimize),
        ("variables_fixed", plan.fixed),
    ):
        for var in names:
            if var not in allowed:
                raise IllegalPlan(
                    f"{section} names {var!r}, which is not an optimization "
                    "variable and cannot be optimized or unfixed"
                )


# ---------------------------------------------------- prompt contexts


def _grid_lines(config) -> str:
    return "\n".join(
        f"- {var}: [{', '.join(format_value(v) for v in config.grid_for(var))}]"
        for var in config.variables
    )


def _scale_lines(config) -> str:
    lines = [
        f"- {derived} = {format_value(mult)} * {base}"
        for derived, (base, mult) in config.width_scales.items()
    ]
    return "\n".join(lines) if lines else "(none)"


def _param_lines(config) -> str:
    lines = [f"- {k} = {format_value(v)}" for k, v in config.params.items()]
    return "\n".join(lines) if lines else "(none)"


def understanding_context(config) -> Dict[str, str]:
    variables = list(config.variables)
    metrics = list(config.metrics)
    var_block = _grid_lines(config)
    scales = _scale_lines(config)
    if scales != "(none)":
        var_block += "\n\nDerived widths (scale with the variables):\n" + scales
    impact_sections = "\n".join(
        f"Impact on {m}:\n"
        f"Explain how the optimization variables ({', '.join(variables)}) "
        f"affect {m}. Focus on which variables have the strongest impact "
        f"on {m} and why.\n"
        for m in metrics
    )
    impact_json = json.dumps(
        {m: f"3-5 sentences on how the optimization variables affect {m}" for m in metrics},
        indent=2,
    )
    return {
        "subckt_name": config.subckt_name,
        "ota_subckt_template": config.subckt_template.strip("\n"),
        "params": _param_lines(config),
        "variables": var_block,
        "testbench_template": config.testbench_template.strip("\n"),
        "metrics_list": "\n".join(f"- {m}" for m in metrics),
        "impact_sections": impact_sections,
        "impact_json_str": impact_json,
    }


def plan_context(config, understanding: CircuitUnderstanding, n_to_optimize: int) -> Dict[str, str]:
    impact = "\n".join(f"- {m}: {text}" for m, text in understanding.impact.items())
    return {
        "subckt_name": config.subckt_name,
        "target_metric": target_metric(config),
        "num_variables_to_optimize": str(n_to_optimize),
        "total_num_variables": str(len(config.variables)),
        "variable_ranges": _grid_lines(config),
        "scaling_rules": _scale_lines(config),
        "variable_impact_summary": impact if impact else "(none)",
        "variable_interactions": understanding.interactions,
        "key_insights": "\n".join(f"- {s}" for s in understanding.key_insights),
    }


def inner_context(
    report: Optional[DiagnosticsReport],
    budget: BudgetState,
    space: SearchSpace,
    config,
) -> Dict[str, str]:
    methods = "none yet"
    best = "none yet"
    iters = "0"
    status_text = "No designs evaluated yet; this is the first iteration of the loop."
    if report is not None:
        s = report.status_summary
        if s["methods"]:
            methods = ", ".join(f"{m} ({n} designs)" for m, n in s["methods"].items())
        if s["best_fom"] is not None:
            best = f"{s['best_fom']:.4f}"
        iters = str(s["iterations"])
        status_text = render_text(report).rstrip("\n")
    return {
        "user_specs": config.user_specs_metric if config is not None else "(not provided)",
        "search_space_cardinality": str(space.cardinality()),
        "budget_remaining": str(budget.remaining),
        "inner_iterations_used": iters,
        "methods_tried": methods,
        "best_fom": best,
        "status_report": status_text,
    }


def outer_context(
    report: DiagnosticsReport,
    space: SearchSpace,
    history: History,
    budget: BudgetState,
    config,
) -> Dict[str, str]:
    s = report.status_summary
    c = report.convergence

    original = config.full_grid_cardinality()
    current = space.cardinality()
    factor = original / current if current else float("inf")
    comparison = (
        f"Full factorial space: {original} combinations. Current generation "
        f"{space.generation} space: {current} combinations ({factor:g}x reduction)."
    )

    active_lines = "\n".join(
        f"- {var}: [{', '.join(format_value(v) for v in values)}]"
        for var, values in space.active.items()
    )
    fixed_lines = (
        "\n".join(f"- {var} = {format_value(v)}" for var, v in space.fixed.items())
        or "(none)"
    )

    prog = "[" + ", ".join("None" if x is None else f"{x:.6g}" for x in c["progression"]) + "]"

    if report.issues:
        issue_lines = "\n".join(
            f"- {issue.variable if issue.variable else 'stagnation'}: "
            f"{issue.evidence} -> {issue.severity} severity"
            for issue in report.issues
        )
    else:
        issue_lines = "(none detected)"

    impact_lines = []
    for var, stats in report.impact.items():
        if not stats["counts"]:
            impact_lines.append(f"- {var}: no valid top designs")
            continue
        shown = ", ".join(f"{format_value(v)}: {n}x" for v, n in stats["counts"][:3])
        tag = " (converged)" if stats["converged"] else ""
        impact_lines.append(
            f"- {var}: top-design range [{format_value(stats['min'])}, "
            f"{format_value(stats['max'])}], most common {shown}{tag}"
        )

    top_lines = []
    for rank, record in enumerate(top_designs(history, TOP_K), start=1):
        assignment = ", ".join(
            f"{k}={format_value(v)}" for k, v in sorted(record.design.assignment.items())
        )
        top_lines.append(f"{rank}. FOM {record.fom:.4f} @ {assignment}")

    stagnant = any(i.kind == "stagnation" for i in report.issues)

    return {
        "iterations_completed": str(s["iterations"]),
        "total_designs": str(s["designs_evaluated"]),
        "netlist": config.subckt_template.strip("\n"),
        "available_variables": "\n".join(f"- {var}" for var in config.variables),
        "fixed_parameters": _param_lines(config),
        "value_ranges": _grid_lines(config),
        "original_search_space_size": str(original),
        "search_space_comparison": comparison,
        "optimized_vars_section": active_lines,
        "fixed_vars_section": fixed_lines,
        "current_search_space": str(current),
        "progression_section": f"Best-so-far FOM by iteration: {prog}",
        "convergence_status": str(c["status"]),
        "convergence_reason": str(c["reason"]),
        "best_fom": f"{s['best_fom']:.4f}" if s["best_fom"] is not None else "none",
        "stagnant": "yes" if stagnant else "no",
        "impact_section": "\n".join(impact_lines) or "(no impact data)",
        "issues_section": issue_lines,
        "top_designs_section": "\n".join(top_lines) or "(no valid designs yet)",
        "target_metric": target_metric(config),
    }


# ------------------------------------------------------------- backend


class LlmBackend:
    """Decisions rendered as prompts, answered by a transport, parsed
    and validated; any failure after one echo-retry falls back to the
    rule policy so the run always proceeds. Fallbacks are collected on
    ``self.fallbacks`` for the run report."""

    name = "llm"

    def __init__(
        self,
        transport,
        transcripts: Optional[TranscriptWriter] = None,
        log: Optional[Callable[[str], None]] = None,
    ):
        self.transport = transport
        self.transcripts = transcripts
        self._log = log if log is not None else (lambda message: None)
        self.fallbacks: List[Dict[str, str]] = []

    # -- shared ask/parse/validate ladder ------------------------------

    def _ask(self, kind: str, template: str, mapping: Mapping[str, str], schema: str, validate):
        prompt, _ = render_template(template, mapping)
        last_error = None
        for attempt in range(2):
            ask = prompt
            if attempt:
                ask = (
                    prompt
                    + "\n\n## PREVIOUS ATTEMPT REJECTED\n"
                    + f"Your previous response was rejected: {last_error}\n"
                    + "Respond again with ONLY the corrected JSON object."
                )
            raw = self.transport.complete(ask, GENERATION_PARAMS)
            if self.transcripts is not None:
                self.transcripts.record(kind, ask, GENERATION_PARAMS, raw)
            repairs: List[str] = []
            try:
                decision = parse_agent_json(raw, schema, repairs)
                decision = validate(decision) if validate is not None else decision
            except _REJECTABLE as exc:
                last_error = str(exc)
                self._log(f"{kind}: response rejected ({exc})")
                continue
            for note in repairs:
                self._log(f"{kind}: {note}")
            return decision
        raise LlmSchemaViolation(f"{kind}: retry also rejected: {last_error}")

    def _fallback(self, kind: str, exc: Exception, produce):
        self.fallbacks.append({"op": kind, "reason": str(exc)})
        self._log(f"{kind}: falling back to the rule policy ({exc})")
        return produce()

    # -- operations -----------------------------------------------------

    def understand(self, config) -> CircuitUnderstanding:
        def validate(understanding: CircuitUnderstanding) -> CircuitUnderstanding:
            # impact prose keyed by unknown metrics is tolerated; the
            # sensitivity map stays empty until the plan response ranks
            # the variables
            return understanding

        try:
            return self._ask(
                "understanding",
                load_prompt("understanding"),
                understanding_context(config),
                "understanding",
                validate,
            )
        except (LlmTransport, Timeout, LlmSchemaViolation) as exc:
            return self._fallback("understanding", exc, lambda: rule_understand(config))

    def plan(self, config, understanding: CircuitUnderstanding, n_to_optimize: int) -> SpacePlan:
        def validate(plan: SpacePlan) -> SpacePlan:
            check_variable_names(plan, config)
            plan = snap_plan(plan, config, self._log)
            if len(plan.optimize) != n_to_optimize:
                self._log(
                    f"plan: model optimized {len(plan.optimize)} variables "
                    f"instead of the requested {n_to_optimize}; accepted"
                )
            first_round_from_plan(config, plan)  # dry run, raises on bad coverage
            return plan

        try:
            return self._ask(
                "plan",
                load_prompt("plan"),
                plan_context(config, understanding, n_to_optimize),
                "plan",
                validate,
            )
        except (LlmTransport, Timeout, LlmSchemaViolation) as exc:
            return self._fallback(
                "plan", exc, lambda: rule_plan(config, understanding, n_to_optimize)
            )

    def decide_inner(
        self,
        report: Optional[DiagnosticsReport],
        budget: BudgetState,
        space: SearchSpace,
        config=None,
        history: Optional[History] = None,
    ) -> InnerDecision:
        def validate(decision: InnerDecision) -> InnerDecision:
            if decision.action == "search":
                checked = validate_method_config(
                    MethodConfig(
                        method=decision.method,
                        n_samples=decision.n_samples,
                        parameters=decision.parameters,
                    )
                )
                decision.method = checked.method
                decision.parameters = dict(checked.parameters)
                remaining = max(1, budget.remaining)
                if decision.n_samples > remaining:
                    self._log(
                        f"inner: n_samples {decision.n_samples} clamped to "
                        f"remaining budget {remaining}"
                    )
                    decision.n_samples = remaining
            return decision

        try:
            return self._ask(
                "inner",
                load_prompt("inner"),
                inner_context(report, budget, space, config),
                "inner",
                validate,
            )
        except (LlmTransport, Timeout, LlmSchemaViolation) as exc:
            return self._fallback(
                "inner", exc, lambda: rule_decide_inner(report, budget, space)
            )

    def decide_outer(
        self,
        report: DiagnosticsReport,
        space: SearchSpace,
        history: History,
        budget: BudgetState,
        understanding: Optional[CircuitUnderstanding] = None,
        config=None,
    ) -> OuterDecision:
        def validate(decision: OuterDecision) -> OuterDecision:
            if decision.plan is not None:
                check_variable_names(decision.plan, config)
                decision.plan = snap_plan(decision.plan, config, self._log)
                # dry run against the next generation; raises IllegalPlan
                # material (PlanIncomplete / ValueOffGrid) when malformed
                space_from_plan(config, decision.plan, generation=space.generation + 1)
            return decision

        try:
            return self._ask(
                "outer",
                load_prompt("outer"),
                outer_context(report, space, history, budget, config),
                "outer",
                validate,
            )
        except (LlmTransport, Timeout, LlmSchemaViolation) as exc:
            return self._fallback(
                "outer",
                exc,
                lambda: rule_decide_outer(report, space, history, budget, understanding),
            )
