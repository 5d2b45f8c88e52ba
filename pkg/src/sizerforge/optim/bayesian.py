"""Bayesian proposals: GP surrogate plus greedy batch acquisition.

Candidates are the full index-grid enumeration while the space stays at
or under 20000 points, otherwise 2000 uniform draws. Batches are picked
greedily with a constant-liar update between picks (the lie is the best
observed value), so one fit serves a whole batch without duplicating
picks.
"""

from __future__ import annotations

import itertools
import random
from typing import List, Optional, Sequence, Tuple

import numpy as np

from ..core import History
from ..errors import InsufficientHistory
from ..space import SearchSpace
from .base import Proposal, in_space_valid, indices_of, materialize
from .gp import ACQUISITIONS, GaussianProcess, acquisition

ENUMERATION_LIMIT = 20_000
FALLBACK_CANDIDATES = 2_000
MIN_OBSERVATIONS = 5

_DEFAULT_WEIGHT = {"EI": 0.2, "PI": 0.2, "UCB": 2.0, "LCB": 2.0}


def normalize_rows(space: SearchSpace, rows: Sequence[Sequence[int]]) -> np.ndarray:
    sizes = [len(values) for _, values in space.active.items()]
    out = np.asarray(rows, dtype=float)
    for j, m in enumerate(sizes):
        out[:, j] = out[:, j] / (m - 1) if m > 1 else 0.0
    return out


def candidate_rows(space: SearchSpace, rng: random.Random) -> List[Tuple[int, ...]]:
    sizes = [len(values) for _, values in space.active.items()]
    if space.cardinality() <= ENUMERATION_LIMIT:
        return list(itertools.product(*(range(m) for m in sizes)))
    return [tuple(rng.randrange(m) for m in sizes) for _ in range(FALLBACK_CANDIDATES)]


def propose_bayesian(
    space: SearchSpace,
    history: History,
    n_samples: int,
    seed: int,
    acquisition_function: str = "EI",
    exploration_weight: Optional[float] = None,
    allow_resample: bool = False,
) -> Proposal:
    if acquisition_function not in ACQUISITIONS:
        raise ValueError(f"unknown acquisition {acquisition_function!r}")
    weight = (
        exploration_weight
        if exploration_weight is not None
        else _DEFAULT_WEIGHT[acquisition_function]
    )
    observations = in_space_valid(history, space)
    if len(observations) < MIN_OBSERVATIONS:
        raise InsufficientHistory(
            f"bayesian proposals need >= {MIN_OBSERVATIONS} valid in-space "
            f"evaluations, have {len(observations)}"
        )

    rng = random.Random(seed)
    obs_rows = [indices_of(space, r.design) for r in observations]
    x = normalize_rows(space, obs_rows)
    y = np.array([r.fom for r in observations], dtype=float)

    rows = candidate_rows(space, rng)
    if not allow_resample:
        evaluated = {r.design.id for r in history.records}
        rows = [row for row in rows if materialize(space, row).id not in evaluated]
    if not rows:
        return Proposal(designs=[], method="bayesian",
                        diagnostics={"note": "no unevaluated candidates"})
    cand = normalize_rows(space, rows)

    picks: List[int] = []
    acq_values: List[float] = []
    remaining = list(range(len(rows)))
    liar = float(np.max(y))
    x_fit, y_fit = x, y
    for _ in range(min(n_samples, len(rows))):
        gp = GaussianProcess().fit(x_fit, y_fit)
        mu, sigma = gp.predict(cand[remaining])
        scores = acquisition(acquisition_function, mu, sigma, float(np.max(y_fit)), weight)
        local_best = int(np.argmax(scores))
        chosen = remaining.pop(local_best)
        picks.append(chosen)
        acq_values.append(float(scores[local_best]))
        if not remaining:
            break
        # constant liar: pretend the pick returned the incumbent best
        x_fit = np.vstack([x_fit, cand[chosen : chosen + 1]])
        y_fit = np.append(y_fit, liar)

    designs = [materialize(space, rows[i]) for i in picks]
    return Proposal(
        designs=designs,
        method="bayesian",
        diagnostics={
            "acquisition": acquisition_function,
            "weight": weight,
            "acquisition_values": acq_values,
            "n_candidates": len(rows),
        },
    )
