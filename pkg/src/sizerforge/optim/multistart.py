"""Multi-start local enumeration.

Starts are the best distinct evaluated designs, padded with LHS rows
when history is thin. Each start owns its L-infinity index neighborhood;
candidates are interleaved round-robin across starts so every start gets
a fair share of the batch after dedup and truncation.

The degenerate radius-0 call returns the starts themselves verbatim (an
explicit resample; the cache serves evaluated starts for free).
"""

from __future__ import annotations

import itertools
import random
from typing import List, Optional, Tuple

from ..core import History
from ..space import SearchSpace
from .base import Proposal, in_space_valid, indices_of, materialize
from .sampling import lhs_index_rows

DEFAULT_N_STARTS = 5
DEFAULT_RADIUS = 2


def neighborhood_rows(row: Tuple[int, ...], sizes: List[int], radius: int):
    """All index vectors within L-infinity ``radius``, lexicographic order."""
    windows = [
        range(max(0, idx - radius), min(m - 1, idx + radius) + 1)
        for idx, m in zip(row, sizes)
    ]
    return itertools.product(*windows)


def propose_multistart(
    space: SearchSpace,
    history: Optional[History],
    n_samples: int,
    seed: int,
    n_starts: int = DEFAULT_N_STARTS,
    search_radius: int = DEFAULT_RADIUS,
    allow_resample: bool = False,
) -> Proposal:
    rng = random.Random(seed)
    sizes = [len(values) for _, values in space.active.items()]

    ranked = in_space_valid(history, space) if history is not None else []
    ranked = sorted(ranked, key=lambda r: (-r.fom, r.eval_index))
    starts: List[Tuple[int, ...]] = []
    seen_ids = set()
    for record in ranked:
        if record.design.id in seen_ids:
            continue
        seen_ids.add(record.design.id)
        starts.append(tuple(indices_of(space, record.design)))
        if len(starts) == n_starts:
            break
    padded = 0
    if len(starts) < n_starts:
        padded = n_starts - len(starts)
        for row in lhs_index_rows(space, padded, rng):
            starts.append(tuple(row))

    if search_radius == 0:
        designs = [materialize(space, row) for row in starts][:n_samples]
        return Proposal(
            designs=designs,
            method="multistart",
            diagnostics={"n_starts": len(starts), "lhs_padding": padded, "radius": 0},
        )

    iterators = [neighborhood_rows(row, sizes, search_radius) for row in starts]
    chosen: List[Tuple[int, ...]] = []
    in_batch = set()
    active = list(range(len(iterators)))
    while active and len(chosen) < n_samples:
        # round-robin truncation keeps the batch balanced across starts
        for slot in list(active):
            try:
                row = next(iterators[slot])
            except StopIteration:
                active.remove(slot)
                continue
            if row in in_batch:
                continue
            design = materialize(space, row)
            if not allow_resample and history is not None and history.contains_design(design.id):
                continue
            in_batch.add(row)
            chosen.append(row)
            if len(chosen) == n_samples:
                break

    designs = [materialize(space, row) for row in chosen]
    return Proposal(
        designs=designs,
        method="multistart",
        diagnostics={
            "n_starts": len(starts),
            "lhs_padding": padded,
            "radius": search_radius,
        },
    )
