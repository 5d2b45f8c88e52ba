"""Simulated annealing over single-variable index moves.

The chain needs an objective value for points nobody has simulated yet.
The proxy is deliberately simple and documented: the figure of merit of
the nearest evaluated in-space neighbor (L1 distance on index
coordinates, earliest evaluation on ties), zero when nothing has been
evaluated. The batch emitted for real evaluation is the sequence of
unique accepted designs the chain visits.
"""

from __future__ import annotations

import math
import random
from typing import Dict, List, Optional, Tuple

from ..core import History
from ..space import SearchSpace
from .base import (
    Proposal,
    best_record,
    in_space_valid,
    indices_of,
    materialize,
    uniform_indices,
)

DEFAULT_T0 = 2.0
DEFAULT_COOLING = 0.95
MAX_STEPS_PER_SAMPLE = 60


def metropolis_accept(delta: float, temperature: float, rng: random.Random) -> bool:
    """Accept an improving move always, a worsening one with exp(delta/T)."""
    if delta >= 0:
        return True
    if temperature <= 0:
        return False
    threshold = math.exp(delta / temperature)
    return rng.random() < threshold


class _NeighborProxy:
    """fom lookup with nearest-evaluated-neighbor fallback."""

    def __init__(self, space: SearchSpace, history: Optional[History]):
        self.exact: Dict[Tuple[int, ...], float] = {}
        records = in_space_valid(history, space) if history is not None else []
        for r in records:
            row = indices_of(space, r.design)
            self.exact.setdefault(tuple(row), r.fom)

    def value(self, row: Tuple[int, ...]) -> float:
        if row in self.exact:
            return self.exact[row]
        if not self.exact:
            return 0.0
        best_dist = None
        best_fom = 0.0
        for known, fom in self.exact.items():
            dist = sum(abs(a - b) for a, b in zip(known, row))
            if best_dist is None or dist < best_dist:
                best_dist = dist
                best_fom = fom
        return best_fom


def propose_annealing(
    space: SearchSpace,
    history: Optional[History],
    n_samples: int,
    seed: int,
    initial_temperature: float = DEFAULT_T0,
    cooling_rate: float = DEFAULT_COOLING,
    allow_resample: bool = False,
) -> Proposal:
    rng = random.Random(seed)
    sizes = [len(values) for _, values in space.active.items()]
    proxy = _NeighborProxy(space, history)

    incumbent = best_record(in_space_valid(history, space)) if history is not None else None
    if incumbent is not None:
        current = tuple(indices_of(space, incumbent.design))
    else:
        current = tuple(uniform_indices(space, rng))

    temperature = initial_temperature
    batch: List[Tuple[int, ...]] = []
    seen = set()
    accepted = 0
    steps = 0
    max_steps = MAX_STEPS_PER_SAMPLE * max(1, n_samples)
    while len(batch) < n_samples and steps < max_steps:
        steps += 1
        var = rng.randrange(len(sizes))
        direction = rng.choice((-1, 1))
        candidate = list(current)
        candidate[var] = min(sizes[var] - 1, max(0, candidate[var] + direction))
        candidate = tuple(candidate)
        if candidate != current:
            delta = proxy.value(candidate) - proxy.value(current)
            if metropolis_accept(delta, temperature, rng):
                current = candidate
                accepted += 1
                if candidate not in seen:
                    seen.add(candidate)
                    design = materialize(space, candidate)
                    already = history is not None and history.contains_design(design.id)
                    if allow_resample or not already:
                        batch.append(candidate)
        temperature *= cooling_rate

    designs = [materialize(space, row) for row in batch]
    return Proposal(
        designs=designs,
        method="annealing",
        diagnostics={
            "initial_temperature": initial_temperature,
            "cooling_rate": cooling_rate,
            "steps": steps,
            "accepted_moves": accepted,
            "final_temperature": temperature,
        },
    )
