"""Benchmark configuration parsing and netlist/testbench rendering.

A benchmark config is a YAML document: fixed params, the optimization
variables (keys with null values), the shared discrete width grid,
scaling rules mapping derived widths onto base variables, pin lists,
metric names, the user specification expression, and two text templates
with ``{placeholder}`` slots (subcircuit and testbench). Unknown keys
are preserved verbatim in ``passthrough`` so benchmark extensions never
break parsing.

Placeholder syntax is exactly single-brace ``{name}``; a doubled brace
``{{`` escapes a literal brace. The same engine renders the agent
prompt templates.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import yaml

from .errors import (
    BadScaleRef,
    ConfigError,
    MissingAssignment,
    MissingKey,
    NonMonotonicGrid,
    TemplateUnresolvable,
    ValueOffGrid,
)
from .specexpr import parse_spec

_SLOT = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")
_LEFTOVER = re.compile(r"\{[A-Za-z_][A-Za-z0-9_]*\}")


def render_template(template: str, mapping: Mapping[str, str]) -> Tuple[str, Dict[str, str]]:
    """Substitute ``{name}`` slots from ``mapping``; ``{{``/``}}`` escape.

    Returns the rendered text and the slots actually used. An unknown
    slot raises TemplateUnresolvable rather than passing through.
    """
    used: Dict[str, str] = {}

    def sub(m: re.Match) -> str:
        tok = m.group(0)
        if tok == "{{":
            return "{"
        if tok == "}}":
            return "}"
        name = m.group(1)
        if name not in mapping:
            raise TemplateUnresolvable(name)
        used[name] = mapping[name]
        return mapping[name]

    return _SLOT.sub(sub, template), used


def extract_placeholders(template: str) -> List[str]:
    """All distinct slot names in declaration order, escapes skipped."""
    seen = []
    for m in _SLOT.finditer(template):
        name = m.group(1)
        if name and name not in seen:
            seen.append(name)
    return seen


def format_value(x: float) -> str:
    """Shortest round-trip decimal form, as SPICE decks expect."""
    if isinstance(x, int):
        return str(x)
    return repr(float(x))


@dataclass
class BenchmarkConfig:
    name: str
    pdk_lib_path: str
    results_dir: str
    user_specs: str
    user_specs_metric: str
    params: Dict[str, float]
    variables: List[str]
    w_values: List[float]
    width_scales: Dict[str, Tuple[str, float]]
    subckt_name: str
    subckt_pins: List[str]
    testbench_signals: Dict[str, str]
    metrics: List[str]
    subckt_template: str
    testbench_template: str
    passthrough: Dict[str, object] = field(default_factory=dict)
    source_text: str = ""

    def grid_for(self, var: str) -> List[float]:
        # one universal grid for every width variable
        return list(self.w_values)

    def full_grid_cardinality(self) -> int:
        return len(self.w_values) ** len(self.variables)

    def fingerprint_text(self) -> str:
        return self.source_text or serialize_config(self)


@dataclass(frozen=True)
class RenderedDeck:
    netlist_text: str
    testbench_text: str
    substitutions: Dict[str, str]


_REQUIRED = (
    "user_specs_metric",
    "variable",
    "W_values",
    "subckt_name",
    "subckt_pins",
    "metrics",
    "ota_subckt_template",
    "testbench_template",
)

_KNOWN = set(_REQUIRED) | {
    "name",
    "pdk_lib_path",
    "results_dir",
    "user_specs",
    "params",
    "width_scales",
    "testbench_signals",
}


def parse_config(source: str) -> BenchmarkConfig:
    try:
        doc = yaml.safe_load(source)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not well-formed: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config document must be a mapping")

    for key in _REQUIRED:
        if key not in doc:
            raise MissingKey(key)

    variable_block = doc["variable"]
    if not isinstance(variable_block, dict) or not variable_block:
        raise ConfigError("'variable' must be a non-empty mapping")
    variables = []
    for name, value in variable_block.items():
        if value is not None:
            raise ConfigError(f"variable {name!r} must have a null value, got {value!r}")
        variables.append(str(name))

    w_values = [float(v) for v in doc["W_values"]]
    if any(v <= 0 for v in w_values):
        raise NonMonotonicGrid("W_values must be positive")
    if any(b <= a for a, b in zip(w_values, w_values[1:])):
        raise NonMonotonicGrid("W_values must be strictly increasing")

    width_scales: Dict[str, Tuple[str, float]] = {}
    for derived, entry in (doc.get("width_scales") or {}).items():
        if not isinstance(entry, (list, tuple)) or len(entry) != 2:
            raise ConfigError(f"width_scales entry {derived!r} must be [base, multiplier]")
        base, multiplier = str(entry[0]), float(entry[1])
        if base not in variables:
            raise BadScaleRef(derived, base)
        if multiplier <= 0:
            raise ConfigError(f"width_scales multiplier for {derived!r} must be positive")
        width_scales[str(derived)] = (base, multiplier)

    params = {str(k): float(v) for k, v in (doc.get("params") or {}).items()}

    metrics = [str(m) for m in doc["metrics"]]
    if not metrics:
        raise ConfigError("metrics list must be non-empty")

    spec_text = str(doc["user_specs_metric"])
    parse_spec(spec_text)  # SpecParseError forwarded

    subckt_name = str(doc["subckt_name"])
    subckt_pins = [str(p) for p in doc["subckt_pins"]]
    testbench_signals = {str(k): str(v) for k, v in (doc.get("testbench_signals") or {}).items()}

    passthrough = {k: v for k, v in doc.items() if k not in _KNOWN}

    config = BenchmarkConfig(
        name=str(doc.get("name", subckt_name.lower())),
        pdk_lib_path=str(doc.get("pdk_lib_path", "")),
        results_dir=str(doc.get("results_dir", "./results")),
        user_specs=str(doc.get("user_specs", "")),
        user_specs_metric=spec_text,
        params=params,
        variables=variables,
        w_values=w_values,
        width_scales=width_scales,
        subckt_name=subckt_name,
        subckt_pins=subckt_pins,
        testbench_signals=testbench_signals,
        metrics=metrics,
        subckt_template=str(doc["ota_subckt_template"]),
        testbench_template=str(doc["testbench_template"]),
        passthrough=passthrough,
        source_text=source,
    )
    _check_templates_resolvable(config)
    return config


def load_config(path: str) -> BenchmarkConfig:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config(fh.read())


def _resolvable_names(config: BenchmarkConfig) -> set:
    names = set(config.params)
    names.update(config.variables)
    names.update(config.width_scales)
    names.update(("pdk_lib_path", "subckt_name", "ota_subckt", "inst_pins"))
    return names


def _check_templates_resolvable(config: BenchmarkConfig) -> None:
    known = _resolvable_names(config)
    for template in (config.subckt_template, config.testbench_template):
        for placeholder in extract_placeholders(template):
            if placeholder not in known:
                raise TemplateUnresolvable(placeholder)


def render_deck(config: BenchmarkConfig, assignment: Mapping[str, float]) -> RenderedDeck:
    """Render subcircuit and testbench text for one grid assignment.

    Derived widths are base value times multiplier, rounded to 9
    decimals so grid arithmetic like 0.84 * 2 renders as "1.68" and not
    a 17-digit float tail. Pure function of (config, assignment).
    """
    for var in config.variables:
        if var not in assignment:
            raise MissingAssignment(var)
    grid = set(config.w_values)
    for var in config.variables:
        if assignment[var] not in grid:
            raise ValueOffGrid(var, assignment[var])

    mapping: Dict[str, str] = {}
    for name, value in config.params.items():
        mapping[name] = format_value(value)
    for var in config.variables:
        mapping[var] = format_value(assignment[var])
    for derived, (base, multiplier) in config.width_scales.items():
        mapping[derived] = format_value(round(assignment[base] * multiplier, 9))
    mapping["pdk_lib_path"] = config.pdk_lib_path
    mapping["subckt_name"] = config.subckt_name

    netlist_text, used_netlist = render_template(config.subckt_template, mapping)
    mapping["ota_subckt"] = netlist_text
    mapping["inst_pins"] = " ".join(config.subckt_pins)
    testbench_text, used_tb = render_template(config.testbench_template, mapping)

    for text in (netlist_text, testbench_text):
        leftover = _LEFTOVER.search(text)
        if leftover:
            raise TemplateUnresolvable(leftover.group(0).strip("{}"))

    substitutions = dict(used_netlist)
    substitutions.update(used_tb)
    return RenderedDeck(netlist_text, testbench_text, substitutions)


class _BlockStr(str):
    pass


def _block_representer(dumper, data):
    return dumper.represent_scalar("tag:yaml.org,2002:str", data, style="|")


class _ConfigDumper(yaml.SafeDumper):
    pass


_ConfigDumper.add_representer(_BlockStr, _block_representer)


def serialize_config(config: BenchmarkConfig) -> str:
    """Emit a document that parses back field-for-field equal."""
    doc = {
        "name": config.name,
        "pdk_lib_path": config.pdk_lib_path,
        "results_dir": config.results_dir,
        "user_specs": config.user_specs,
        "user_specs_metric": config.user_specs_metric,
        "params": dict(config.params),
        "variable": {v: None for v in config.variables},
        "W_values": list(config.w_values),
        "width_scales": {k: [b, m] for k, (b, m) in config.width_scales.items()},
        "subckt_name": config.subckt_name,
        "subckt_pins": list(config.subckt_pins),
        "testbench_signals": dict(config.testbench_signals),
        "metrics": list(config.metrics),
        "ota_subckt_template": _BlockStr(config.subckt_template),
        "testbench_template": _BlockStr(config.testbench_template),
    }
    doc.update(config.passthrough)
    return yaml.dump(doc, Dumper=_ConfigDumper, sort_keys=False, width=4096)


def config_equal(a: BenchmarkConfig, b: BenchmarkConfig) -> bool:
    """Field-for-field equality, ignoring the raw source text."""
    fields = (
        "name", "pdk_lib_path", "results_dir", "user_specs", "user_specs_metric",
        "params", "variables", "w_values", "width_scales", "subckt_name",
        "subckt_pins", "testbench_signals", "metrics", "subckt_template",
        "testbench_template", "passthrough",
    )
    return all(getattr(a, f) == getattr(b, f) for f in fields)
