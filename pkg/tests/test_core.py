"""Objective engine and run history bookkeeping."""

import logging
import math
import random

import pytest

from sizerforge.core import (
    Design,
    EvaluatedDesign,
    History,
    IterationSummary,
    assess,
    best_so_far,
    compute_fom,
    design_from,
    improvement_pct,
)
from sizerforge.errors import EmptyHistory, InsufficientHistory, NoValidDesign
from sizerforge.specexpr import parse_spec, split_directions

BENCH = parse_spec("fom > 0.100 AND dc_gain_db > 55 AND ugbw > 10 AND power_dc < 50")


def _clauses(text):
    return split_directions(parse_spec(text))


def _record(i, fom, feasible=False, method="lhs", iteration=1, cached=False, status="ok"):
    return EvaluatedDesign(
        design=design_from({"w": float(i)}),
        raw_metrics={},
        normalized={},
        fom=fom,
        feasible=feasible,
        sim_status=status,
        iteration=iteration,
        method=method,
        eval_index=i,
        wall_time=0.0,
        cached=cached,
    )


# ---------------------------------------------------------------- fom


def test_fom_is_ratio_of_normalized_products():
    maximize, minimize = _clauses("gain > 50 AND bw > 10 AND power < 2")
    fom = compute_fom(maximize, minimize, {"gain": 100.0, "bw": 20.0, "power": 1.0})
    # (100/50)*(20/10) / (1/2) = 8
    assert fom == pytest.approx(8.0, rel=1e-12)


def test_fom_all_at_spec_is_exactly_one():
    maximize, minimize = _clauses("gain > 50 AND bw > 10 AND power < 2")
    assert compute_fom(maximize, minimize, {"gain": 50.0, "bw": 10.0, "power": 2.0}) == 1.0


def test_fom_scale_invariance():
    # scaling a metric and its threshold together leaves the value unchanged
    rng = random.Random(5)
    for _ in range(50):
        g, p = rng.uniform(1, 100), rng.uniform(1, 100)
        scale = rng.uniform(0.01, 1000)
        a = compute_fom(*_clauses("g > 10 AND p < 5"), {"g": g, "p": p})
        b = compute_fom(
            *_clauses(f"g > {10 * scale!r} AND p < 5"), {"g": g * scale, "p": p}
        )
        assert b == pytest.approx(a, rel=1e-12)


@pytest.mark.parametrize(
    "metrics",
    [
        {"gain": -1.0, "power": 1.0},
        {"gain": 0.0, "power": 1.0},
        {"gain": 10.0, "power": -2.0},
        {"gain": 10.0, "power": 0.0},
        {"gain": float("nan"), "power": 1.0},
        {"gain": float("inf"), "power": 1.0},
    ],
)
def test_fom_failed_values_return_none(metrics):
    maximize, minimize = _clauses("gain > 50 AND power < 2")
    assert compute_fom(maximize, minimize, metrics) is None


def test_fom_zero_threshold_returns_none():
    maximize, minimize = _clauses("gain > 0 AND power < 2")
    assert compute_fom(maximize, minimize, {"gain": 10.0, "power": 1.0}) is None


def test_fom_missing_metric_raises():
    maximize, minimize = _clauses("gain > 50 AND power < 2")
    from sizerforge.errors import MissingMetric

    with pytest.raises(MissingMetric):
        compute_fom(maximize, minimize, {"gain": 10.0})


# ---------------------------------------------------------------- assess


def test_assess_excludes_fom_clause_from_products():
    metrics = {"dc_gain_db": 60.0, "ugbw": 20.0, "power_dc": 25.0}
    fom, feasible, _ = assess(BENCH, metrics)
    want = (60.0 / 55.0) * (20.0 / 10.0) / (25.0 / 50.0)
    assert fom == pytest.approx(want, rel=1e-12)
    assert feasible


def test_assess_engine_value_feeds_fom_clause():
    # barely above the fom threshold passes, barely below fails
    lo = {"dc_gain_db": 55.0 + 1e-9, "ugbw": 10.0 + 1e-9, "power_dc": 49.999}
    fom, feasible, _ = assess(BENCH, lo)
    assert fom is not None and fom > 0.100
    assert feasible

    spec = parse_spec("fom > 8.0 AND dc_gain_db > 55 AND ugbw > 10 AND power_dc < 50")
    fom, feasible, _ = assess(spec, {"dc_gain_db": 60.0, "ugbw": 20.0, "power_dc": 25.0})
    assert fom == pytest.approx(4.36363636363636, rel=1e-10)
    assert not feasible


def test_assess_warns_on_reported_fom_mismatch(caplog):
    metrics = {"dc_gain_db": 60.0, "ugbw": 20.0, "power_dc": 25.0, "fom": 1.0}
    with caplog.at_level(logging.WARNING, logger="sizerforge.core"):
        fom, _, _ = assess(BENCH, metrics)
    assert fom == pytest.approx(4.36363636363636, rel=1e-10)
    assert any("disagrees" in r.message for r in caplog.records)


def test_assess_quiet_on_close_reported_fom(caplog):
    engine = (60.0 / 55.0) * (20.0 / 10.0) / (25.0 / 50.0)
    metrics = {"dc_gain_db": 60.0, "ugbw": 20.0, "power_dc": 25.0, "fom": engine * 1.005}
    with caplog.at_level(logging.WARNING, logger="sizerforge.core"):
        assess(BENCH, metrics)
    assert not any("disagrees" in r.message for r in caplog.records)


def test_assess_failed_fom_is_infeasible():
    fom, feasible, normalized = assess(BENCH, {"dc_gain_db": -5.0, "ugbw": 20.0, "power_dc": 25.0})
    assert fom is None
    assert not feasible
    assert normalized == {}


def test_assess_normalized_values():
    _, _, normalized = assess(BENCH, {"dc_gain_db": 55.0, "ugbw": 20.0, "power_dc": 25.0})
    assert normalized["dc_gain_db"] == pytest.approx(1.0)
    assert normalized["ugbw"] == pytest.approx(2.0)
    assert normalized["power_dc"] == pytest.approx(0.5)


# ---------------------------------------------------------------- design ids


def test_design_id_is_content_derived_and_order_insensitive():
    a = design_from({"x": 1.0, "y": 2.0})
    b = design_from({"y": 2.0, "x": 1.0})
    assert a.id == b.id
    assert a == b
    assert design_from({"x": 1.0, "y": 2.5}).id != a.id


def test_design_hashable():
    a = design_from({"x": 1.0})
    b = design_from({"x": 1.0})
    assert len({a, b}) == 1


# ---------------------------------------------------------------- history


def test_history_eval_indices_dense_from_one():
    hist = History()
    for i in (1, 2, 3):
        hist.append(_record(i, 0.1 * i))
    assert hist.next_eval_index() == 4
    with pytest.raises(ValueError):
        hist.append(_record(7, 0.5))
    with pytest.raises(ValueError):
        hist.append(_record(3, 0.5))


def test_history_summary_best_must_be_nondecreasing():
    hist = History()
    hist.append(_record(1, 0.5))
    hist.add_summary(IterationSummary(1, "lhs", 1, 0.5, None))
    hist.append(_record(2, 0.4))
    with pytest.raises(ValueError):
        hist.add_summary(IterationSummary(2, "lhs", 1, 0.4, -20.0))


def test_valid_records_drop_failures():
    hist = History()
    hist.append(_record(1, 0.5))
    hist.append(_record(2, None, status="sim_failed"))
    hist.append(_record(3, None))
    assert [r.eval_index for r in hist.valid_records()] == [1]


def test_contains_design():
    hist = History()
    r = _record(1, 0.5)
    hist.append(r)
    assert hist.contains_design(r.design.id)
    assert not hist.contains_design("nope")


def test_history_jsonl_round_trip_fields():
    import json

    hist = History()
    hist.append(_record(1, 0.5, feasible=True, method="genetic"))
    hist.add_summary(IterationSummary(1, "genetic", 1, 0.5, None))
    lines = [json.loads(line) for line in hist.to_jsonl().splitlines()]
    kinds = [entry["kind"] for entry in lines]
    assert kinds == ["evaluation", "summary"]
    assert lines[0]["fom"] == 0.5
    assert lines[0]["method"] == "genetic"
    assert lines[1]["best_fom_so_far"] == 0.5


# ---------------------------------------------------------------- best/improvement


def test_best_so_far_prefers_earliest_on_ties():
    hist = History()
    hist.append(_record(1, 0.3))
    hist.append(_record(2, 0.7))
    hist.append(_record(3, 0.7))
    best, at = best_so_far(hist)
    assert best.eval_index == 2
    assert at == 2


def test_best_so_far_error_cases():
    hist = History()
    with pytest.raises(EmptyHistory):
        best_so_far(hist)
    hist.append(_record(1, None, status="sim_failed"))
    with pytest.raises(NoValidDesign):
        best_so_far(hist)


def test_improvement_pct_window():
    hist = History()
    hist.append(_record(1, 1.0))
    hist.add_summary(IterationSummary(1, "lhs", 1, 1.0, None))
    hist.append(_record(2, 1.5))
    hist.add_summary(IterationSummary(2, "lhs", 1, 1.5, 50.0))
    assert improvement_pct(hist) == pytest.approx(50.0)
    with pytest.raises(InsufficientHistory):
        improvement_pct(hist, window=2)


def test_improvement_pct_degenerate_reference():
    hist = History()
    hist.append(_record(1, None))
    hist.add_summary(IterationSummary(1, "lhs", 1, None, None))
    hist.append(_record(2, 2.0))
    hist.add_summary(IterationSummary(2, "lhs", 1, 2.0, None))
    assert improvement_pct(hist) == math.inf

    hist2 = History()
    hist2.append(_record(1, None))
    hist2.add_summary(IterationSummary(1, "lhs", 1, None, None))
    hist2.append(_record(2, None))
    hist2.add_summary(IterationSummary(2, "lhs", 1, None, None))
    assert improvement_pct(hist2) == 0.0
