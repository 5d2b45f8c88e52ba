"""Simulated-annealing proposals and the acceptance rule."""

import math
import random

import pytest

from sizerforge.core import EvaluatedDesign, History, design_from
from sizerforge.optim.annealing import metropolis_accept, propose_annealing
from sizerforge.space import SearchSpace

GRID = (0.84, 1.05, 1.26, 1.47, 1.68, 1.89, 2.10, 2.31, 2.52)


def _space():
    return SearchSpace(
        active={"W_a": GRID, "W_b": GRID},
        fixed={},
        full_grid={"W_a": GRID, "W_b": GRID},
        generation=0,
    )


def _seed_history(pairs):
    hist = History()
    for (ia, ib), fom in pairs:
        hist.append(
            EvaluatedDesign(
                design=design_from({"W_a": GRID[ia], "W_b": GRID[ib]}),
                raw_metrics={},
                normalized={},
                fom=fom,
                feasible=False,
                sim_status="ok",
                iteration=1,
                method="lhs",
                eval_index=hist.next_eval_index(),
                wall_time=0.0,
            )
        )
    return hist


def test_zero_temperature_accepts_only_improvements():
    rng = random.Random(123)
    for _ in range(10_000):
        assert metropolis_accept(0.01, 0.0, rng)
        assert metropolis_accept(0.0, 0.0, rng)
        assert not metropolis_accept(-0.01, 0.0, rng)


def test_improvements_always_accepted_at_any_temperature():
    rng = random.Random(9)
    for t in (0.0, 0.5, 3.0, 100.0):
        for _ in range(100):
            assert metropolis_accept(rng.uniform(0, 5), t, rng)


def test_finite_temperature_acceptance_rate_matches_boltzmann():
    # empirical acceptance over 10k draws within 3 sigma of exp(delta/T)
    n = 10_000
    for delta, temperature in ((-0.5, 1.0), (-1.0, 2.0), (-2.0, 1.5)):
        rng = random.Random(hash((delta, temperature)) & 0xFFFF)
        p = math.exp(delta / temperature)
        hits = sum(metropolis_accept(delta, temperature, rng) for _ in range(n))
        sigma = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) < 3 * sigma


def test_proposal_walks_from_incumbent():
    space = _space()
    hist = _seed_history([((4, 4), 0.9), ((0, 0), 0.1)])
    proposal = propose_annealing(space, hist, 6, seed=1)
    assert proposal.method == "annealing"
    assert 0 < len(proposal.designs) <= 6
    for d in proposal.designs:
        assert not hist.contains_design(d.id)
        assert d.assignment["W_a"] in GRID


def test_cold_start_without_history():
    proposal = propose_annealing(_space(), None, 5, seed=2)
    assert 0 < len(proposal.designs) <= 5


def test_step_budget_bounds_the_walk():
    space = _space()
    proposal = propose_annealing(space, None, 4, seed=3)
    assert proposal.diagnostics["steps"] <= 60 * 4


def test_temperature_cools_geometrically():
    space = _space()
    proposal = propose_annealing(space, None, 5, seed=4,
                                 initial_temperature=2.0, cooling_rate=0.9)
    d = proposal.diagnostics
    assert d["initial_temperature"] == 2.0
    assert d["final_temperature"] == pytest.approx(2.0 * 0.9 ** d["steps"], rel=1e-9)


def test_determinism_per_seed():
    space = _space()
    hist = _seed_history([((4, 4), 0.9), ((0, 0), 0.1)])
    a = propose_annealing(space, hist, 6, seed=11)
    b = propose_annealing(space, hist, 6, seed=11)
    c = propose_annealing(space, hist, 6, seed=12)
    assert [d.id for d in a.designs] == [d.id for d in b.designs]
    assert [d.id for d in a.designs] != [d.id for d in c.designs]
