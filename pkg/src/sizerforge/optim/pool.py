"""Method dispatch and parameter validation for the arsenal.

Each method accepts only its own parameter names; anything else is a
BadParameter before any sampling happens. "optuna" is accepted as an
alias for bayesian with PI acquisition since it shows up in strategy
guidance without its own definition.

Baselines reuse the orchestrated samplers with pinned presets:
ga_baseline = genetic(population 20, crossover 0.8, mutation 0.1),
bo_baseline = bayesian(UCB, weight 2.0), turbo_baseline = trust-region
LHS with external TurboState.
"""

from __future__ import annotations

import dataclasses
import random
from typing import Dict, Mapping, Optional

from ..core import History
from ..errors import BadParameter, UnknownMethod
from ..space import SearchSpace
from .annealing import propose_annealing
from .base import Proposal, dedupe_against_history, in_space_valid, materialize, uniform_indices
from .bayesian import MIN_OBSERVATIONS, propose_bayesian
from .genetic import propose_genetic
from .multistart import propose_multistart
from .sampling import propose_lhs
from .turbo import TurboState, propose_turbo_baseline

ORCHESTRATED = ("lhs", "genetic", "bayesian", "adaptive", "annealing", "multistart")
BASELINES = ("ga_baseline", "bo_baseline", "turbo_baseline")

PARAMETER_NAMES: Dict[str, frozenset] = {
    "lhs": frozenset(),
    "genetic": frozenset({"mutation_rate", "crossover_rate", "tournament_size", "population"}),
    "bayesian": frozenset({"acquisition_function", "exploration_weight"}),
    "adaptive": frozenset({"explore_weight", "exploit_weight", "random_weight"}),
    "annealing": frozenset({"initial_temperature", "cooling_rate"}),
    "multistart": frozenset({"n_starts", "search_radius"}),
    "ga_baseline": frozenset({"mutation_rate", "crossover_rate", "tournament_size", "population"}),
    "bo_baseline": frozenset({"acquisition_function", "exploration_weight"}),
    "turbo_baseline": frozenset(),
}

_ACQUISITIONS = ("EI", "UCB", "LCB", "PI")

GA_BASELINE_PRESET = {"population": 20, "crossover_rate": 0.8, "mutation_rate": 0.1}
BO_BASELINE_PRESET = {"acquisition_function": "UCB", "exploration_weight": 2.0}
ADAPTIVE_DEFAULTS = {"explore_weight": 0.5, "exploit_weight": 0.5, "random_weight": 0.2}


@dataclasses.dataclass(frozen=True)
class MethodConfig:
    method: str
    n_samples: int
    parameters: Mapping[str, object] = dataclasses.field(default_factory=dict)
    seed: int = 0


def _require_number(name: str, value: object, low: float = None, high: float = None) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise BadParameter(f"{name} must be a number, got {value!r}")
    x = float(value)
    if low is not None and x < low:
        raise BadParameter(f"{name} must be >= {low}, got {x}")
    if high is not None and x > high:
        raise BadParameter(f"{name} must be <= {high}, got {x}")
    return x


def _require_count(name: str, value: object, low: int = 1) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise BadParameter(f"{name} must be an integer, got {value!r}")
    if value < low:
        raise BadParameter(f"{name} must be >= {low}, got {value}")
    return value


def validate_method_config(config: MethodConfig) -> MethodConfig:
    """Normalize and validate; returns a possibly-rewritten config.

    The only rewrite is the optuna alias. Unknown method names raise
    UnknownMethod; unknown or ill-typed parameters raise BadParameter.
    """
    method = config.method
    params = dict(config.parameters or {})
    if method == "optuna":
        method = "bayesian"
        params.setdefault("acquisition_function", "PI")
    if method not in PARAMETER_NAMES:
        raise UnknownMethod(f"unknown method {config.method!r}")
    allowed = PARAMETER_NAMES[method]
    for name in params:
        if name not in allowed:
            raise BadParameter(f"{name!r} is not a parameter of {method}")
    if config.n_samples < 1:
        raise BadParameter(f"n_samples must be positive, got {config.n_samples}")

    if "mutation_rate" in params:
        _require_number("mutation_rate", params["mutation_rate"], 0.0, 1.0)
    if "crossover_rate" in params:
        _require_number("crossover_rate", params["crossover_rate"], 0.0, 1.0)
    if "tournament_size" in params:
        _require_count("tournament_size", params["tournament_size"], 1)
    if "population" in params:
        _require_count("population", params["population"], 2)
    if "acquisition_function" in params:
        acq = params["acquisition_function"]
        if acq not in _ACQUISITIONS:
            raise BadParameter(f"acquisition_function must be one of {_ACQUISITIONS}, got {acq!r}")
    if "exploration_weight" in params:
        _require_number("exploration_weight", params["exploration_weight"], 0.0)
    if "initial_temperature" in params:
        _require_number("initial_temperature", params["initial_temperature"], 0.0)
    if "cooling_rate" in params:
        _require_number("cooling_rate", params["cooling_rate"], 0.0, 1.0)
    if "n_starts" in params:
        _require_count("n_starts", params["n_starts"], 1)
    if "search_radius" in params:
        _require_count("search_radius", params["search_radius"], 0)
    for w in ("explore_weight", "exploit_weight", "random_weight"):
        if w in params:
            _require_number(w, params[w], 0.0)

    return dataclasses.replace(config, method=method, parameters=params)


def _apportion(n: int, weights: Mapping[str, float]) -> Dict[str, int]:
    """Largest-remainder split of n among the weighted components."""
    total = sum(weights.values())
    if total <= 0:
        raise BadParameter("adaptive weights must not all be zero")
    quotas = {k: n * w / total for k, w in weights.items()}
    counts = {k: int(q) for k, q in quotas.items()}
    leftover = n - sum(counts.values())
    by_remainder = sorted(
        weights, key=lambda k: quotas[k] - counts[k], reverse=True
    )
    for k in by_remainder[:leftover]:
        counts[k] += 1
    return counts


def _propose_adaptive(
    space: SearchSpace,
    config: MethodConfig,
    history: Optional[History],
    allow_resample: bool,
) -> Proposal:
    weights = dict(ADAPTIVE_DEFAULTS)
    weights.update({k: float(v) for k, v in config.parameters.items()})
    counts = _apportion(config.n_samples, weights)

    rng = random.Random(config.seed)
    seeds = {k: rng.randrange(2**32) for k in ("explore", "exploit", "random")}

    batches = []
    if counts["explore_weight"]:
        batches.append(
            propose_lhs(space, counts["explore_weight"], seeds["explore"], history, allow_resample)
        )
    exploit_method = "multistart"
    if counts["exploit_weight"]:
        n_valid = len(in_space_valid(history, space)) if history is not None else 0
        if n_valid >= MIN_OBSERVATIONS:
            exploit_method = "bayesian"
            batches.append(
                propose_bayesian(
                    space,
                    history,
                    counts["exploit_weight"],
                    seeds["exploit"],
                    allow_resample=allow_resample,
                )
            )
        else:
            batches.append(
                propose_multistart(
                    space,
                    history,
                    counts["exploit_weight"],
                    seeds["exploit"],
                    allow_resample=allow_resample,
                )
            )
    random_designs = []
    if counts["random_weight"]:
        rrng = random.Random(seeds["random"])
        draws = [
            materialize(space, uniform_indices(space, rrng))
            for _ in range(counts["random_weight"])
        ]
        random_designs = dedupe_against_history(draws, history, allow_resample)

    seen = set()
    merged = []
    for design in [d for b in batches for d in b.designs] + random_designs:
        if design.id in seen:
            continue
        seen.add(design.id)
        merged.append(design)
    merged = merged[: config.n_samples]
    return Proposal(
        designs=merged,
        method="adaptive",
        diagnostics={
            "split": counts,
            "exploit_method": exploit_method,
            "weights": weights,
        },
    )


def propose(
    space: SearchSpace,
    config: MethodConfig,
    history: Optional[History] = None,
    allow_resample: bool = False,
    turbo_state: Optional[TurboState] = None,
) -> Proposal:
    """Validate the config and dispatch to the named method."""
    cfg = validate_method_config(config)
    method = cfg.method
    params = dict(cfg.parameters)

    if method == "lhs":
        return propose_lhs(space, cfg.n_samples, cfg.seed, history, allow_resample)
    if method == "genetic":
        return propose_genetic(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            mutation_rate=params.get("mutation_rate", 0.2),
            crossover_rate=params.get("crossover_rate", 0.8),
            tournament_size=params.get("tournament_size", 3),
            population=params.get("population"),
            allow_resample=allow_resample,
        )
    if method == "bayesian":
        return propose_bayesian(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            acquisition_function=params.get("acquisition_function", "EI"),
            exploration_weight=params.get("exploration_weight"),
            allow_resample=allow_resample,
        )
    if method == "adaptive":
        return _propose_adaptive(space, cfg, history, allow_resample)
    if method == "annealing":
        return propose_annealing(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            initial_temperature=params.get("initial_temperature", 2.0),
            cooling_rate=params.get("cooling_rate", 0.95),
            allow_resample=allow_resample,
        )
    if method == "multistart":
        return propose_multistart(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            n_starts=params.get("n_starts", 5),
            search_radius=params.get("search_radius", 2),
            allow_resample=allow_resample,
        )
    if method == "ga_baseline":
        preset = dict(GA_BASELINE_PRESET)
        preset.update(params)
        proposal = propose_genetic(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            mutation_rate=preset["mutation_rate"],
            crossover_rate=preset["crossover_rate"],
            tournament_size=preset.get("tournament_size", 3),
            population=preset["population"],
            allow_resample=allow_resample,
        )
        return dataclasses.replace(proposal, method="ga_baseline")
    if method == "bo_baseline":
        preset = dict(BO_BASELINE_PRESET)
        preset.update(params)
        proposal = propose_bayesian(
            space,
            history,
            cfg.n_samples,
            cfg.seed,
            acquisition_function=preset["acquisition_function"],
            exploration_weight=preset["exploration_weight"],
            allow_resample=allow_resample,
        )
        return dataclasses.replace(proposal, method="bo_baseline")
    if method == "turbo_baseline":
        return propose_turbo_baseline(
            space, history, cfg.n_samples, cfg.seed, state=turbo_state, allow_resample=allow_resample
        )
    raise UnknownMethod(f"unknown method {method!r}")
