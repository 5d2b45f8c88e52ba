"""Method dispatch, parameter validation, and the adaptive mix."""

import pytest

from sizerforge.core import EvaluatedDesign, History, design_from
from sizerforge.errors import BadParameter, UnknownMethod
from sizerforge.optim.pool import (
    ADAPTIVE_DEFAULTS,
    BO_BASELINE_PRESET,
    GA_BASELINE_PRESET,
    MethodConfig,
    ORCHESTRATED,
    _apportion,
    propose,
    validate_method_config,
)
from sizerforge.space import SearchSpace

GRID = (0.84, 1.05, 1.26, 1.47, 1.68, 1.89, 2.10, 2.31, 2.52)


def _space():
    return SearchSpace(
        active={"W_a": GRID, "W_b": GRID},
        fixed={},
        full_grid={"W_a": GRID, "W_b": GRID},
        generation=0,
    )


def _history(n=6):
    hist = History()
    for i in range(n):
        hist.append(
            EvaluatedDesign(
                design=design_from({"W_a": GRID[i], "W_b": GRID[(i * 3) % 9]}),
                raw_metrics={},
                normalized={},
                fom=0.1 * (i + 1),
                feasible=False,
                sim_status="ok",
                iteration=1,
                method="lhs",
                eval_index=hist.next_eval_index(),
                wall_time=0.0,
            )
        )
    return hist


def test_baseline_presets_pinned():
    assert GA_BASELINE_PRESET == {"population": 20, "crossover_rate": 0.8, "mutation_rate": 0.1}
    assert BO_BASELINE_PRESET == {"acquisition_function": "UCB", "exploration_weight": 2.0}
    assert ADAPTIVE_DEFAULTS == {"explore_weight": 0.5, "exploit_weight": 0.5, "random_weight": 0.2}


@pytest.mark.parametrize("method", ORCHESTRATED)
def test_every_orchestrated_method_dispatches(method):
    space = _space()
    hist = _history(6)
    proposal = propose(space, MethodConfig(method=method, n_samples=5, seed=1), history=hist)
    assert proposal.method == method
    assert len(proposal.designs) <= 5 or method == "annealing"
    for d in proposal.designs:
        assert d.assignment["W_a"] in GRID


@pytest.mark.parametrize("method", ("ga_baseline", "bo_baseline", "turbo_baseline"))
def test_baseline_methods_report_their_own_label(method):
    space = _space()
    hist = _history(6)
    proposal = propose(space, MethodConfig(method=method, n_samples=5, seed=1), history=hist)
    assert proposal.method == method


def test_optuna_alias_maps_to_bayesian_pi():
    checked = validate_method_config(MethodConfig(method="optuna", n_samples=5))
    assert checked.method == "bayesian"
    assert checked.parameters["acquisition_function"] == "PI"


def test_unknown_method_rejected():
    with pytest.raises(UnknownMethod):
        validate_method_config(MethodConfig(method="gradient_descent", n_samples=5))


def test_unknown_parameter_rejected():
    with pytest.raises(BadParameter):
        validate_method_config(
            MethodConfig(method="lhs", n_samples=5, parameters={"temperature": 1.0})
        )


@pytest.mark.parametrize(
    "method,params",
    [
        ("genetic", {"mutation_rate": 1.5}),
        ("genetic", {"crossover_rate": -0.1}),
        ("genetic", {"tournament_size": 0}),
        ("genetic", {"population": 1}),
        ("bayesian", {"acquisition_function": "MAX"}),
        ("bayesian", {"exploration_weight": -1}),
        ("annealing", {"cooling_rate": 1.5}),
        ("annealing", {"initial_temperature": -2}),
        ("multistart", {"n_starts": 0}),
        ("multistart", {"search_radius": -1}),
        ("genetic", {"mutation_rate": "high"}),
        ("genetic", {"tournament_size": True}),
    ],
)
def test_out_of_range_parameters_rejected(method, params):
    with pytest.raises(BadParameter):
        validate_method_config(MethodConfig(method=method, n_samples=5, parameters=params))


def test_nonpositive_sample_count_rejected():
    with pytest.raises(BadParameter):
        validate_method_config(MethodConfig(method="lhs", n_samples=0))


def test_apportion_largest_remainder():
    counts = _apportion(10, {"a": 0.5, "b": 0.5, "c": 0.2})
    assert sum(counts.values()) == 10
    assert counts["a"] + counts["b"] >= 8  # heavy weights dominate
    with pytest.raises(BadParameter):
        _apportion(5, {"a": 0.0, "b": 0.0})


def test_adaptive_mix_merges_and_dedupes():
    space = _space()
    hist = _history(6)
    proposal = propose(space, MethodConfig(method="adaptive", n_samples=12, seed=4), history=hist)
    assert proposal.method == "adaptive"
    assert len(proposal.designs) <= 12
    ids = [d.id for d in proposal.designs]
    assert len(ids) == len(set(ids))
    assert proposal.diagnostics["exploit_method"] == "bayesian"  # 6 >= 5 observations
    split = proposal.diagnostics["split"]
    assert sum(split.values()) == 12


def test_adaptive_thin_history_uses_multistart():
    space = _space()
    hist = _history(3)
    proposal = propose(space, MethodConfig(method="adaptive", n_samples=9, seed=4), history=hist)
    assert proposal.diagnostics["exploit_method"] == "multistart"


def test_method_config_seed_changes_proposals():
    space = _space()
    a = propose(space, MethodConfig(method="lhs", n_samples=8, seed=0))
    b = propose(space, MethodConfig(method="lhs", n_samples=8, seed=1))
    assert [d.id for d in a.designs] != [d.id for d in b.designs]
