"""Latin hypercube proposals: stratification counts, dedupe, determinism."""

import random
from collections import Counter

from sizerforge.core import EvaluatedDesign, History
from sizerforge.optim.sampling import lhs_index_rows, propose_lhs, stratified_column
from sizerforge.space import SearchSpace

GRID9 = (0.84, 1.05, 1.26, 1.47, 1.68, 1.89, 2.10, 2.31, 2.52)


def _space():
    return SearchSpace(
        active={"W_a": GRID9, "W_b": GRID9[:4]},
        fixed={},
        full_grid={"W_a": GRID9, "W_b": GRID9},
        generation=0,
    )


def _note(hist, design, fom):
    hist.append(
        EvaluatedDesign(
            design=design,
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


def test_stratified_column_counts_exact_multiple():
    rng = random.Random(3)
    column = stratified_column(9, 18, rng)
    assert Counter(column) == {i: 2 for i in range(9)}


def test_stratified_column_counts_floor_or_ceil():
    rng = random.Random(3)
    for m, n in ((9, 20), (4, 7), (5, 3), (3, 10)):
        counts = Counter(stratified_column(m, n, rng))
        base = n // m
        assert sum(counts.values()) == n
        for idx in range(m):
            assert counts.get(idx, 0) in (base, base + 1)
        # the "extra" draws never repeat a value
        assert sum(1 for c in counts.values() if c == base + 1) == n % m


def test_lhs_rows_stratify_every_column():
    space = _space()
    rows = lhs_index_rows(space, 36, random.Random(11))
    col_a = Counter(row[0] for row in rows)
    col_b = Counter(row[1] for row in rows)
    assert col_a == {i: 4 for i in range(9)}
    assert col_b == {i: 9 for i in range(4)}


def test_propose_lhs_designs_live_in_space():
    space = _space()
    proposal = propose_lhs(space, 12, seed=5)
    assert proposal.method == "lhs"
    assert len(proposal.designs) == 12
    for d in proposal.designs:
        assert d.assignment["W_a"] in GRID9
        assert d.assignment["W_b"] in GRID9[:4]


def test_propose_lhs_seed_determinism():
    space = _space()
    a = propose_lhs(space, 10, seed=42)
    b = propose_lhs(space, 10, seed=42)
    c = propose_lhs(space, 10, seed=43)
    assert [d.id for d in a.designs] == [d.id for d in b.designs]
    assert [d.id for d in a.designs] != [d.id for d in c.designs]


def test_propose_lhs_drops_already_evaluated():
    space = _space()
    first = propose_lhs(space, 10, seed=7)
    hist = History()
    for d in first.designs:
        _note(hist, d, 0.5)
    again = propose_lhs(space, 10, seed=7, history=hist)
    assert not set(d.id for d in again.designs) & set(d.id for d in first.designs)
    # allow_resample turns the dedupe off
    resampled = propose_lhs(space, 10, seed=7, history=hist, allow_resample=True)
    assert [d.id for d in resampled.designs] == [d.id for d in first.designs]


def test_propose_lhs_requested_count_in_diagnostics():
    space = _space()
    proposal = propose_lhs(space, 30, seed=1)
    assert proposal.diagnostics["requested"] == 30
