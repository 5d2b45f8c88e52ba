"""Shared fixtures: a synthetic stagnating run used across test modules."""

from __future__ import annotations

import itertools

import pytest

from sizerforge.core import Design, EvaluatedDesign, History, IterationSummary
from sizerforge.space import SearchSpace

W_GRID = (0.84, 1.05, 1.26, 1.47, 1.68, 1.89, 2.10, 2.31, 2.52)

# top-10 (W_tail, W_casc) pairs chosen so the marginal counts are
# tail {1.26: 3, 2.10: 3, 2.52: 2, 0.84: 2} and
# casc {1.68: 4, 2.10: 3, 1.26: 2, 2.52: 1}; W_diff/W_load pinned.
TOP_PAIRS = [
    (1.26, 1.68),
    (1.26, 2.10),
    (1.26, 1.26),
    (2.10, 1.68),
    (2.10, 2.10),
    (2.10, 2.52),
    (2.52, 1.68),
    (2.52, 1.26),
    (0.84, 1.68),
    (0.84, 2.10),
]


def _record(hist, assignment, fom, iteration, method):
    design = Design(
        id="d%04d" % (len(hist) + 1),
        assignment=dict(assignment),
    )
    hist.append(
        EvaluatedDesign(
            design=design,
            raw_metrics={"fom": fom},
            normalized={},
            fom=fom,
            feasible=False,
            sim_status="ok",
            iteration=iteration,
            method=method,
            eval_index=hist.next_eval_index(),
            wall_time=0.0,
        )
    )


def build_stagnation_state():
    """A 4-iteration, 72-design run whose best FoM froze at 0.099.

    The top 10 designs all sit at W_diff's lower edge and fill W_load's
    single-value list, so boundary clustering fires for both variables
    alongside a 3-iteration stagnation flag.
    """
    space = SearchSpace(
        active={
            "W_tail": W_GRID,
            "W_diff": (0.84, 1.26, 1.68, 2.10),
            "W_casc": (1.26, 1.47, 1.68, 1.89, 2.10, 2.31, 2.52),
            "W_load": (1.68,),
        },
        fixed={},
        full_grid={v: W_GRID for v in ("W_tail", "W_diff", "W_casc", "W_load")},
        generation=1,
    )

    top_designs = [
        {"W_tail": tail, "W_diff": 0.84, "W_casc": casc, "W_load": 1.68}
        for tail, casc in TOP_PAIRS
    ]
    top_foms = [0.099 - 0.0002 * i for i in range(10)]

    top_keys = {tuple(sorted(d.items())) for d in top_designs}
    fillers = []
    for tail, diff, casc in itertools.product(W_GRID, (1.26, 1.68), space.active["W_casc"]):
        a = {"W_tail": tail, "W_diff": diff, "W_casc": casc, "W_load": 1.68}
        if tuple(sorted(a.items())) in top_keys:
            continue
        fillers.append(a)
        if len(fillers) == 62:
            break

    hist = History()
    filler_iter = iter(fillers)

    # iteration 1: 25 LHS designs, best exactly 0.095
    for j in range(25):
        _record(hist, next(filler_iter), 0.095 - 0.0001 * j, 1, "lhs")
    hist.add_summary(IterationSummary(1, "lhs", 25, 0.095, None))

    # iteration 2: the 0.099 best appears, then stalls for two more rounds
    for fom, a in zip(top_foms[0:4], top_designs[0:4]):
        _record(hist, a, fom, 2, "bayesian")
    for j in range(11):
        _record(hist, next(filler_iter), 0.090 - 0.0001 * j, 2, "bayesian")
    hist.add_summary(IterationSummary(2, "bayesian", 15, 0.099, 100.0 * (0.099 - 0.095) / 0.095))

    for fom, a in zip(top_foms[4:7], top_designs[4:7]):
        _record(hist, a, fom, 3, "bayesian")
    for j in range(12):
        _record(hist, next(filler_iter), 0.089 - 0.0001 * j, 3, "bayesian")
    hist.add_summary(IterationSummary(3, "bayesian", 15, 0.099, 0.0))

    for fom, a in zip(top_foms[7:10], top_designs[7:10]):
        _record(hist, a, fom, 4, "annealing")
    for j in range(14):
        _record(hist, next(filler_iter), 0.088 - 0.0001 * j, 4, "annealing")
    hist.add_summary(IterationSummary(4, "annealing", 17, 0.099, 0.0))

    return hist, space


@pytest.fixture
def stagnation_state():
    return build_stagnation_state()
