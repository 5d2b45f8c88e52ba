"""Constraint expression mini-language: parsing, evaluation, direction split."""

import random

import pytest

from sizerforge.errors import MissingMetric, SpecParseError, UnsupportedCombinator
from sizerforge.specexpr import evaluate_spec, parse_spec, split_directions, targets

BENCH_EXPR = "fom > 0.100 AND dc_gain_db > 55 AND ugbw > 10 AND power_dc < 50"


def test_parse_bench_expression():
    spec = parse_spec(BENCH_EXPR)
    assert len(spec.clauses) == 4
    assert [c.metric for c in spec.clauses] == ["fom", "dc_gain_db", "ugbw", "power_dc"]
    assert [c.op for c in spec.clauses] == [">", ">", ">", "<"]
    assert [c.threshold for c in spec.clauses] == [0.100, 55.0, 10.0, 50.0]


def test_direction_split():
    spec = parse_spec(BENCH_EXPR)
    maximize, minimize = split_directions(spec)
    assert {c.metric for c in maximize} == {"fom", "dc_gain_db", "ugbw"}
    assert {c.metric for c in minimize} == {"power_dc"}


def test_and_is_case_insensitive():
    for conj in ("AND", "and", "And", "aNd"):
        spec = parse_spec(f"a > 1 {conj} b < 2")
        assert len(spec.clauses) == 2


def test_all_four_operators():
    spec = parse_spec("a > 1 AND b >= 2 AND c < 3 AND d <= 4")
    verdict = evaluate_spec(spec, {"a": 1.5, "b": 2.0, "c": 2.9, "d": 4.0})
    assert verdict.passed
    # boundary cases: strict ops reject equality, non-strict accept it
    assert not evaluate_spec(spec, {"a": 1.0, "b": 2.0, "c": 2.9, "d": 4.0}).passed
    assert not evaluate_spec(spec, {"a": 1.5, "b": 2.0, "c": 3.0, "d": 4.0}).passed


def test_comparisons_are_exact():
    spec = parse_spec("x > 0.1")
    assert not evaluate_spec(spec, {"x": 0.1}).passed
    assert evaluate_spec(spec, {"x": 0.1 + 1e-15}).passed


@pytest.mark.parametrize(
    "text",
    [
        "a > 1 OR b < 2",
        "a > 1 or b < 2",
        "NOT a > 1",
        "(a > 1) AND b < 2",
        "a > 1 AND (b < 2)",
    ],
)
def test_unsupported_combinators_rejected(text):
    with pytest.raises(UnsupportedCombinator):
        parse_spec(text)


@pytest.mark.parametrize(
    "text",
    [
        "",
        "a >",
        "> 1",
        "a == 1",
        "a != 1",
        "a > 1 AND",
        "AND a > 1",
        "a > 1 b < 2",
        "a > one",
    ],
)
def test_malformed_expressions_rejected(text):
    with pytest.raises(SpecParseError):
        parse_spec(text)


def test_missing_metric_raises():
    spec = parse_spec("a > 1 AND b < 2")
    with pytest.raises(MissingMetric):
        evaluate_spec(spec, {"a": 2.0})


def test_per_clause_results():
    spec = parse_spec("a > 1 AND b < 2")
    verdict = evaluate_spec(spec, {"a": 2.0, "b": 5.0})
    assert not verdict.passed
    assert len(verdict.per_clause) == 2
    by_metric = {c.metric: c for c in verdict.per_clause}
    assert by_metric["a"].passed
    assert not by_metric["b"].passed
    assert by_metric["b"].value == 5.0


def test_verdict_is_conjunction_of_clauses():
    spec = parse_spec(BENCH_EXPR)
    rng = random.Random(20081)
    for _ in range(500):
        metrics = {
            "fom": rng.uniform(-1, 1),
            "dc_gain_db": rng.uniform(0, 120),
            "ugbw": rng.uniform(0, 40),
            "power_dc": rng.uniform(0, 120),
        }
        verdict = evaluate_spec(spec, metrics)
        assert verdict.passed == all(c.passed for c in verdict.per_clause)
        # recompute each clause by hand
        want = (
            metrics["fom"] > 0.100
            and metrics["dc_gain_db"] > 55
            and metrics["ugbw"] > 10
            and metrics["power_dc"] < 50
        )
        assert verdict.passed == want


def test_scientific_notation_thresholds():
    spec = parse_spec("cap < 1e-12 AND gain >= 2.5e1")
    assert evaluate_spec(spec, {"cap": 0.9e-12, "gain": 25.0}).passed


def test_targets_map():
    spec = parse_spec(BENCH_EXPR)
    assert targets(spec) == {"fom": 0.100, "dc_gain_db": 55.0, "ugbw": 10.0, "power_dc": 50.0}


def test_pretty_round_trips_through_parser():
    spec = parse_spec("a>1 AND  b<=2.5")
    again = parse_spec(spec.pretty())
    assert again.clauses == spec.clauses
