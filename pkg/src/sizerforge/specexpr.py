"""Parser and evaluator for the specification-metric expression language.

The language is deliberately tiny::

    expr := cmp ('AND' cmp)*
    cmp  := ident op number
    op   := '>' | '>=' | '<' | '<='

``AND`` is case-insensitive and whitespace is free-form. There is no OR,
no NOT and no parenthesised grouping: those tokens are rejected loudly
(:class:`~sizerforge.errors.UnsupportedCombinator`) rather than half
supported.

Clauses with ``>``/``>=`` name metrics to be maximized; ``<``/``<=``
name metrics to be minimized. The threshold of each clause is that
metric's specification target.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Dict, List, Mapping, Tuple

from .errors import MissingMetric, SpecParseError, UnsupportedCombinator

MAXIMIZE_OPS = (">", ">=")
MINIMIZE_OPS = ("<", "<=")

_TOKEN = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<number>[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>>=|<=|>|<)
  | (?P<bad>.)
    """,
    re.VERBOSE,
)

_REJECTED_COMBINATORS = {"or", "not", "xor"}


@dataclass(frozen=True)
class Comparison:
    """A single clause ``metric op threshold``."""

    metric: str
    op: str
    threshold: float

    def holds(self, value: float) -> bool:
        if self.op == ">":
            return value > self.threshold
        if self.op == ">=":
            return value >= self.threshold
        if self.op == "<":
            return value < self.threshold
        if self.op == "<=":
            return value <= self.threshold
        raise ValueError(f"unknown operator {self.op!r}")

    @property
    def direction(self) -> str:
        return "maximize" if self.op in MAXIMIZE_OPS else "minimize"

    def pretty(self) -> str:
        return f"{self.metric} {self.op} {_format_number(self.threshold)}"


@dataclass(frozen=True)
class SpecExpr:
    clauses: Tuple[Comparison, ...]

    def pretty(self) -> str:
        return " AND ".join(c.pretty() for c in self.clauses)

    @property
    def metric_names(self) -> Tuple[str, ...]:
        return tuple(c.metric for c in self.clauses)


@dataclass(frozen=True)
class ClauseResult:
    metric: str
    op: str
    threshold: float
    value: float
    passed: bool


@dataclass(frozen=True)
class SpecVerdict:
    passed: bool
    per_clause: Tuple[ClauseResult, ...]


def _format_number(x: float) -> str:
    # shortest round-trip form; ints lose the trailing ".0"
    if x == int(x) and abs(x) < 1e15:
        return str(int(x))
    return repr(x)


def _tokenize(text: str):
    tokens = []
    for m in _TOKEN.finditer(text):
        kind = m.lastgroup
        if kind == "ws":
            continue
        if kind == "bad":
            ch = m.group()
            if ch in "()":
                raise UnsupportedCombinator(m.start(), ch)
            raise SpecParseError(m.start(), f"unexpected character {ch!r}")
        tokens.append((kind, m.group(), m.start()))
    return tokens


def parse_spec(text: str) -> SpecExpr:
    """Parse ``text`` into a :class:`SpecExpr`.

    Raises SpecParseError with the offending position, or
    UnsupportedCombinator for OR/NOT/parentheses.
    """
    tokens = _tokenize(text)
    pos = 0
    clauses: List[Comparison] = []
    seen = set()

    def peek():
        return tokens[pos] if pos < len(tokens) else None

    def take(kind, what):
        nonlocal pos
        tok = peek()
        if tok is None:
            raise SpecParseError(len(text), f"expected {what}, found end of input")
        if tok[0] != kind:
            raise SpecParseError(tok[2], f"expected {what}, found {tok[1]!r}")
        pos += 1
        return tok

    while True:
        ident = take("ident", "metric name")
        name = ident[1]
        if name.lower() in _REJECTED_COMBINATORS:
            raise UnsupportedCombinator(ident[2], name)
        if name.lower() == "and":
            raise SpecParseError(ident[2], f"expected metric name, found {name!r}")
        op = take("op", "comparison operator")
        num = take("number", "number")
        if name in seen:
            raise SpecParseError(ident[2], f"duplicate metric {name!r}")
        seen.add(name)
        threshold = float(num[1])
        clauses.append(Comparison(name, op[1], threshold))

        tok = peek()
        if tok is None:
            break
        if tok[0] == "ident" and tok[1].lower() == "and":
            pos += 1
            continue
        if tok[0] == "ident" and tok[1].lower() in _REJECTED_COMBINATORS:
            raise UnsupportedCombinator(tok[2], tok[1])
        raise SpecParseError(tok[2], f"expected 'AND' or end of input, found {tok[1]!r}")

    if not clauses:
        raise SpecParseError(0, "empty expression")
    return SpecExpr(tuple(clauses))


def evaluate_spec(spec: SpecExpr, metrics: Mapping[str, float]) -> SpecVerdict:
    """Check every clause against ``metrics``.

    Comparisons are exact floating comparisons, no epsilon. A metric
    named by a clause but absent from ``metrics`` is an error, never a
    silent failure.
    """
    results = []
    ok = True
    for clause in spec.clauses:
        if clause.metric not in metrics:
            raise MissingMetric(clause.metric)
        value = metrics[clause.metric]
        passed = clause.holds(value)
        ok = ok and passed
        results.append(ClauseResult(clause.metric, clause.op, clause.threshold, value, passed))
    return SpecVerdict(ok, tuple(results))


def split_directions(spec: SpecExpr) -> Tuple[Tuple[Comparison, ...], Tuple[Comparison, ...]]:
    """Split clauses into (maximize, minimize) sets, declaration order kept."""
    maximize = tuple(c for c in spec.clauses if c.op in MAXIMIZE_OPS)
    minimize = tuple(c for c in spec.clauses if c.op in MINIMIZE_OPS)
    return maximize, minimize


def targets(spec: SpecExpr) -> Dict[str, float]:
    return {c.metric: c.threshold for c in spec.clauses}
