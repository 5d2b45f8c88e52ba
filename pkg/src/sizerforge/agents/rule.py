"""Deterministic decision policies.

These encode the prose decision frameworks as code and double as the
fallback for every model misbehavior, so a run can always finish
without network access. Inner policy: stop on spec-met or on a diverse
plateau, otherwise pick a method by history depth. Outer policy, in
priority order: converged on feasible, unfix on stagnation, expand on
boundary clustering, change focus on converged variables, continue on
progress, narrow only on overwhelming concentration.
"""

from __future__ import annotations

import dataclasses
from typing import Dict, List, Optional, Tuple

from ..core import History
from ..diagnostics import DiagnosticsReport
from ..space import SearchSpace, SpaceEdit, unfix_window
from ..specexpr import parse_spec, split_directions
from .schemas import CircuitUnderstanding, InnerDecision, OuterDecision, SpacePlan

PLATEAU_PCT = 2.0
EXPLOIT_STD = 0.01

_SENSITIVITY_ORDER = {"critical": 0, "high": 1, "medium": 2, "low": 3}


@dataclasses.dataclass
class BudgetState:
    """Budget snapshot handed to the decision policies."""

    total_remaining: int
    inner_remaining: int
    outer_loops_used: int = 0
    prior_unfixes: int = 0

    @property
    def remaining(self) -> int:
        return max(0, min(self.total_remaining, self.inner_remaining))


def _clamp_samples(share: int, floor: int, remaining: int) -> int:
    n = max(floor, share)
    return max(1, min(n, remaining))


def rule_understand(config) -> CircuitUnderstanding:
    """Generic, model-free understanding: every variable medium sensitivity."""
    variables = list(config.variables)
    scales = getattr(config, "width_scales", {})
    mapping_bits = []
    for var in variables:
        targets = [name for name, (base, _) in scales.items() if base == var]
        if targets:
            mapping_bits.append(f"{var} drives {', '.join(targets)}")
        else:
            mapping_bits.append(f"{var} is a standalone width")
    return CircuitUnderstanding(
        topology_overview=(
            f"{config.subckt_name} sized by {len(variables)} width variables "
            "on a shared discrete grid."
        ),
        variable_mapping="; ".join(mapping_bits) + ".",
        impact={
            m: "no model-based analysis available; treated as medium impact"
            for m in config.metrics
        },
        interactions="not analyzed; assume weak coupling until data says otherwise",
        key_insights=[
            "no model-based analysis available",
            "treat every width variable as medium sensitivity until evaluations arrive",
            "let boundary clustering and stagnation evidence drive later refinement",
        ],
        sensitivity={v: "medium" for v in variables},
    )


def rank_variables(config, understanding: CircuitUnderstanding) -> List[str]:
    """Sensitivity first (critical > high > medium > low), then declaration."""
    variables = list(config.variables)
    sens = understanding.sensitivity if understanding else {}
    return sorted(
        variables,
        key=lambda v: (_SENSITIVITY_ORDER.get(sens.get(v, "medium"), 2), variables.index(v)),
    )


def _even_indices(m: int, k: int = 5) -> List[int]:
    picked = sorted({round(i * (m - 1) / (k - 1)) for i in range(k)})
    return picked


def target_metric(config) -> str:
    """The metric the plan optimizes: fom when present, else the first
    maximize clause of the user spec, else the first listed metric."""
    if "fom" in config.metrics:
        return "fom"
    maximize, _ = split_directions(parse_spec(config.user_specs_metric))
    if maximize:
        return maximize[0].metric
    return config.metrics[0]


def rule_plan(config, understanding: CircuitUnderstanding, n_to_optimize: int) -> SpacePlan:
    """Top-n ranked variables active on 5 evenly spaced grid values
    (extremes included); the rest pinned at the grid median."""
    variables = list(config.variables)
    if not 1 <= n_to_optimize <= len(variables):
        raise ValueError(f"n_to_optimize must be in 1..{len(variables)}")
    ranked = rank_variables(config, understanding)
    chosen = set(ranked[:n_to_optimize])
    sens = understanding.sensitivity if understanding else {}

    ranking = []
    for rank, var in enumerate(ranked, start=1):
        level = sens.get(var, "medium")
        ranking.append(
            {
                "rank": rank,
                "variable": var,
                "impact_on_target": level if level in ("critical", "high", "medium", "low") else "medium",
                "reasoning": "sensitivity-ordered; declaration order breaks ties",
            }
        )

    optimize: Dict[str, Dict[str, object]] = {}
    fixed: Dict[str, Dict[str, object]] = {}
    for var in variables:
        grid = list(config.grid_for(var))
        rank = ranked.index(var) + 1
        if var in chosen:
            values = [grid[i] for i in _even_indices(len(grid))]
            optimize[var] = {
                "rank": rank,
                "values": values,
                "num_choices": len(values),
                "range_reasoning": "even grid coverage including both extremes",
                "expected_behavior": "unknown before evaluations; coverage first",
                "sensitivity": sens.get(var, "medium"),
            }
        else:
            pin = grid[len(grid) // 2]
            fixed[var] = {
                "rank": rank,
                "value": pin,
                "fixed_reasoning": "lowest ranked; frozen to shrink the first-round space",
                "why_this_value": "grid median is the least committal pin",
                "risk_if_suboptimal": "medium",
            }

    reduced = 1
    for entry in optimize.values():
        reduced *= len(entry["values"])
    original = config.full_grid_cardinality()
    factor = original / reduced
    per_var = " * ".join(str(len(e["values"])) for e in optimize.values()) or "1"
    summary = {
        "original_full_space": original,
        "reduced_search_space": reduced,
        "reduction_factor": f"{factor:g}",
        "calculation": f"{original} -> {per_var} = {reduced}",
        "explanation": "sparse even coverage of the top-ranked variables",
    }
    return SpacePlan(
        target=target_metric(config),
        n_to_optimize=n_to_optimize,
        ranking=ranking,
        optimize=optimize,
        fixed=fixed,
        summary=summary,
    )


def _stop(reason: str, assessment: str) -> InnerDecision:
    return InnerDecision(
        action="stop",
        reasoning=reason,
        confidence="high",
        expected_improvement="none expected",
        convergence_assessment=assessment,
    )


def _search(method, n_samples, parameters, reason, assessment, confidence="medium"):
    return InnerDecision(
        action="search",
        method=method,
        n_samples=n_samples,
        parameters=parameters,
        reasoning=reason,
        confidence=confidence,
        expected_improvement="incremental",
        convergence_assessment=assessment,
    )


def rule_decide_inner(
    report: Optional[DiagnosticsReport],
    budget: BudgetState,
    space: SearchSpace,
) -> InnerDecision:
    remaining = budget.remaining
    if remaining <= 0:
        return _stop("budget exhausted", "no samples left to spend")

    cardinality = space.cardinality()
    if report is None:
        # first iteration of a run: nothing to analyze yet
        n = _clamp_samples(cardinality // 4, 15, remaining)
        return _search("lhs", n, {}, "no history; stratified space coverage", "not started")

    s = report.status_summary
    c = report.convergence
    if s["feasible_found"]:
        return _stop("specification met", "feasible design in history")

    recent = c["recent_improvement_pct"]
    distinct_methods = len(s["methods"])
    if (
        recent is not None
        and recent < PLATEAU_PCT
        and s["iterations"] >= 3
        and distinct_methods >= 2
    ):
        return _stop(
            f"plateau: recent improvement {recent:.2f}% < {PLATEAU_PCT:g}% after "
            f"{s['iterations']} iterations and {distinct_methods} methods",
            "improvement exhausted under the current space",
        )

    valid = s["valid_designs"]
    if valid < 10:
        n = _clamp_samples(cardinality // 4, 15, remaining)
        return _search("lhs", n, {}, "thin history; keep stratifying", "too early to call")

    if c["status"] == "stagnant":
        n = _clamp_samples(cardinality // 10, 8, remaining)
        if s["last_method"] == "annealing":
            return _search(
                "multistart",
                n,
                {"n_starts": 5, "search_radius": 2},
                "stagnant after annealing; sweep the best neighborhoods",
                "stagnating",
            )
        return _search(
            "annealing",
            n,
            {"initial_temperature": 3.0, "cooling_rate": 0.95},
            "stagnant; hot annealing chain to escape the basin",
            "stagnating",
        )

    if valid < 25:
        mutation = 0.4 if (recent is not None and recent < PLATEAU_PCT) else 0.2
        n = _clamp_samples(cardinality * 15 // 100, 20, remaining)
        return _search(
            "genetic",
            n,
            {"mutation_rate": mutation, "crossover_rate": 0.8, "tournament_size": 3},
            "mid-depth history; recombine the leaders",
            "developing",
        )

    n = _clamp_samples(cardinality // 10, 5, remaining)
    std = s.get("top_k_fom_std")
    if std is not None and std < EXPLOIT_STD:
        return _search(
            "bayesian",
            n,
            {"acquisition_function": "UCB", "exploration_weight": 2.5},
            "top designs nearly tied; widen via optimistic UCB",
            "exploitation phase",
        )
    return _search(
        "bayesian",
        n,
        {"acquisition_function": "EI", "exploration_weight": 0.2},
        "deep history; model-guided expected improvement",
        "improving",
    )


def _outer(action, edit, reason, changes, confidence="medium") -> OuterDecision:
    return OuterDecision(
        action=action,
        target="fom",
        reasoning=reason,
        changes_from_previous=changes,
        plan=None,
        edit=edit,
        expected_improvement="unknown" if action not in ("converged",) else "none",
        confidence=confidence,
    )


def _best_fixed_var(space: SearchSpace, understanding: Optional[CircuitUnderstanding]) -> Optional[str]:
    if not space.fixed:
        return None
    sens = understanding.sensitivity if understanding else {}
    fixed_vars = [v for v in space.full_grid if v in space.fixed]
    return min(
        fixed_vars,
        key=lambda v: (_SENSITIVITY_ORDER.get(sens.get(v, "medium"), 2), fixed_vars.index(v)),
    )


def _expandable(space: SearchSpace, var: str, side: str) -> bool:
    grid = list(space.full_grid[var])
    values = space.active[var]
    if side == "lower":
        return grid.index(values[0]) > 0
    return grid.index(values[-1]) < len(grid) - 1


def rule_decide_outer(
    report: DiagnosticsReport,
    space: SearchSpace,
    history: History,
    budget: BudgetState,
    understanding: Optional[CircuitUnderstanding] = None,
) -> OuterDecision:
    s = report.status_summary
    if s["feasible_found"]:
        return _outer("converged", None, "feasible design found", "none", "high")

    stagnant = any(i.kind == "stagnation" for i in report.issues)
    boundary_issues = [i for i in report.issues if i.kind != "stagnation"]

    if stagnant and space.fixed:
        var = _best_fixed_var(space, understanding)
        n_values = 7 if budget.prior_unfixes > 0 else 5
        window = unfix_window(space.full_grid[var], space.fixed[var], n_values)
        edit = SpaceEdit(
            action="unfix_variables",
            unfix={var: window},
            rationale=f"stagnation with {var} still fixed",
        )
        return _outer(
            "unfix_variables",
            edit,
            f"stagnation detected; unfixing {var} with {len(window)} values",
            f"{var} promoted from fixed to active",
        )

    if boundary_issues:
        # 2 adjacent grid values per flagged side; a side already at the
        # grid end escalates to an unfix when possible, else flips to the
        # opposite side so the variable still gets room
        dead_side = any(
            not _expandable(space, i.variable, "lower" if i.kind == "boundary_lower" else "upper")
            for i in boundary_issues
        )
        if dead_side and space.fixed:
            var = _best_fixed_var(space, understanding)
            n_values = 7 if budget.prior_unfixes > 0 else 5
            window = unfix_window(space.full_grid[var], space.fixed[var], n_values)
            edit = SpaceEdit(
                action="unfix_variables",
                unfix={var: window},
                rationale="boundary at grid end; opening a fixed dimension instead",
            )
            return _outer(
                "unfix_variables",
                edit,
                f"flagged boundary sits at the grid end; unfixing {var}",
                f"{var} promoted from fixed to active",
            )

        expand: Dict[str, Dict[str, int]] = {}
        for issue in boundary_issues:
            var = issue.variable
            side = "lower" if issue.kind == "boundary_lower" else "upper"
            if not _expandable(space, var, side):
                side = "upper" if side == "lower" else "lower"
                if not _expandable(space, var, side):
                    continue
            sides = expand.setdefault(var, {})
            sides[side] = 2
        if expand:
            edit = SpaceEdit(
                action="expand_ranges",
                expand=expand,
                rationale="top designs cluster at active-range boundaries",
            )
            touched = ", ".join(expand)
            return _outer(
                "expand_ranges",
                edit,
                f"boundary clustering on {touched}; widening by 2 grid steps per side",
                f"ranges expanded for {touched}",
            )

    converged_vars = [v for v, st in report.impact.items() if st.get("converged")]
    if converged_vars and space.fixed:
        var = converged_vars[0]
        modal = report.impact[var]["counts"][0][0]
        unfix_var = _best_fixed_var(space, understanding)
        window = unfix_window(space.full_grid[unfix_var], space.fixed[unfix_var], 5)
        edit = SpaceEdit(
            action="change_focus",
            fix={var: modal},
            unfix={unfix_var: window},
            rationale=f"{var} converged to {modal}; explore {unfix_var} instead",
        )
        return _outer(
            "change_focus",
            edit,
            f"{var} converged; swapping focus to {unfix_var}",
            f"{var} fixed at {modal}, {unfix_var} activated",
        )

    if report.convergence["status"] == "improving":
        edit = SpaceEdit(action="continue_current", rationale="still improving")
        return _outer(
            "continue_current", edit, "steady improvement; keep the current space", "none"
        )

    narrow = _narrow_runs(report, space)
    if narrow is not None:
        edit = SpaceEdit(
            action="narrow_ranges",
            narrow=narrow,
            rationale="top designs concentrate on short contiguous runs",
        )
        return _outer(
            "narrow_ranges",
            edit,
            "overwhelming concentration of top designs; shrinking to the winning runs",
            "; ".join(f"{v} -> {list(r)}" for v, r in narrow.items()),
        )

    return _outer(
        "converged",
        None,
        "no escalation applies; search space options exhausted",
        "none",
    )


def _narrow_runs(
    report: DiagnosticsReport, space: SearchSpace
) -> Optional[Dict[str, Tuple[float, ...]]]:
    """Contiguous value runs covering 80% of the top designs, when that
    run is at most 3 values long for every active variable."""
    runs: Dict[str, Tuple[float, ...]] = {}
    changed = False
    for var, values in space.active.items():
        stats = report.impact.get(var)
        if not stats or not stats["counts"]:
            return None
        counts = dict(stats["counts"])
        total = sum(counts.values())
        need = 0.8 * total
        # shortest contiguous window of active values covering the quota
        best_run: Optional[Tuple[int, int]] = None
        for i in range(len(values)):
            covered = 0
            for j in range(i, len(values)):
                covered += counts.get(values[j], 0)
                if covered >= need:
                    if best_run is None or (j - i) < (best_run[1] - best_run[0]):
                        best_run = (i, j)
                    break
        if best_run is None:
            return None
        i, j = best_run
        if j - i + 1 > 3:
            return None
        lo, hi = i, j
        # hard floor of 2 kept values
        if hi - lo + 1 < 2:
            if hi + 1 < len(values):
                hi += 1
            elif lo > 0:
                lo -= 1
            else:
                return None
        run = tuple(values[lo : hi + 1])
        runs[var] = run
        if run != values:
            changed = True
    return runs if changed else None
