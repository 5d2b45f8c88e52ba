"""Genetic proposals: tournament selection, uniform crossover, index-step
mutation, elitism.

Parents come from the valid in-space history. With fewer than two usable
parents the method silently falls back to LHS seeding and says so in the
proposal diagnostics instead of raising: the inner loop must keep moving
on a cold start.

Elitism resubmits the incumbent best as the first batch entry; the
evaluation cache serves it for free, and it guarantees the best value of
every generation never drops below the running best.
"""

from __future__ import annotations

import random
from typing import List, Optional

from ..core import History
from ..space import SearchSpace
from .base import (
    Proposal,
    best_record,
    dedupe_against_history,
    in_space_valid,
    indices_of,
    materialize,
)
from .sampling import lhs_index_rows

MUTATION_STEPS = (-2, -1, 1, 2)


def mutate_gene(idx: int, m: int, rng: random.Random) -> int:
    step = rng.choice(MUTATION_STEPS)
    return min(m - 1, max(0, idx + step))


def tournament(pool, k: int, rng: random.Random):
    picks = [pool[rng.randrange(len(pool))] for _ in range(k)]
    return max(picks, key=lambda r: r.fom)


def crossover_uniform(p1: List[int], p2: List[int], rng: random.Random) -> List[int]:
    return [a if rng.random() < 0.5 else b for a, b in zip(p1, p2)]


def propose_genetic(
    space: SearchSpace,
    history: Optional[History],
    n_samples: int,
    seed: int,
    mutation_rate: float = 0.2,
    crossover_rate: float = 0.8,
    tournament_size: int = 3,
    population: Optional[int] = None,
    allow_resample: bool = False,
) -> Proposal:
    rng = random.Random(seed)
    n = population if population is not None else n_samples
    sizes = [len(values) for _, values in space.active.items()]

    parents = in_space_valid(history, space) if history is not None else []
    if len(parents) < 2:
        rows = lhs_index_rows(space, n, rng)
        designs = [materialize(space, row) for row in rows]
        designs = dedupe_against_history(designs, history, allow_resample)
        return Proposal(
            designs=designs,
            method="genetic",
            diagnostics={"fallback": "lhs_seeding", "parents_available": len(parents)},
        )

    elite = best_record(parents)
    offspring_rows: List[List[int]] = []
    provenance: List[dict] = []
    budget = n - 1  # first slot goes to the elite
    for _ in range(max(0, budget)):
        p1 = tournament(parents, tournament_size, rng)
        p2 = tournament(parents, tournament_size, rng)
        g1 = indices_of(space, p1.design)
        g2 = indices_of(space, p2.design)
        if rng.random() < crossover_rate:
            child = crossover_uniform(g1, g2, rng)
        else:
            child = list(g1)
        for j, m in enumerate(sizes):
            if rng.random() < mutation_rate:
                child[j] = mutate_gene(child[j], m, rng)
        offspring_rows.append(child)
        provenance.append({"parents": [p1.design.id, p2.design.id]})

    offspring = [materialize(space, row) for row in offspring_rows]
    offspring = dedupe_against_history(offspring, history, allow_resample)
    # elitism: incumbent always re-enters the evaluated set (cache hit, free)
    designs = [elite.design] + [d for d in offspring if d.id != elite.design.id]
    designs = designs[:n]
    return Proposal(
        designs=designs,
        method="genetic",
        diagnostics={"elite": elite.design.id, "offspring": provenance},
    )
