"""JSON case files: parsing and per-unit conversion."""

from __future__ import annotations

import json
import math
from importlib import resources
from pathlib import Path

from .network import InvalidNetworkError, Network, ValidationReport, validate_network

__all__ = ["BUILTIN_CASES", "CaseFormatError", "CaseValidationError", "load_case", "parse_case", "resolve_case"]

BUILTIN_CASES = ("ieee14",)


class CaseFormatError(ValueError):
    """The case document is malformed (bad JSON, missing or mistyped fields)."""


class CaseValidationError(InvalidNetworkError):
    """The case parsed but describes an invalid network."""

    def __init__(self, report: ValidationReport):
        super().__init__(str(report))
        self.report = report


def resolve_case(name_or_path) -> Path:
    """Map a built-in case name to its packaged file; pass other paths through."""
    if str(name_or_path) in BUILTIN_CASES:
        return Path(str(resources.files("online_dcopf") / "data" / f"{name_or_path}.json"))
    return Path(name_or_path)


def _field(obj, key, where, kind=None):
    if not isinstance(obj, dict):
        raise CaseFormatError(f"{where}: expected an object, got {type(obj).__name__}")
    if key not in obj:
        raise CaseFormatError(f"{where}: missing field '{key}'")
    value = obj[key]
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value):
            raise CaseFormatError(f"{where}.{key}: expected a finite number, got {value!r}")
        return float(value)
    if kind == "list" and not isinstance(value, list):
        raise CaseFormatError(f"{where}.{key}: expected a list")
    return value


def parse_case(doc: dict, validate: bool = True) -> Network:
    """Build a per-unit :class:`Network` from a decoded case document.

    Powers are given in MW and divided by ``base_mva``. Several generators or
    loads on one bus are summed.
    """
    base = _field(doc, "base_mva", "case", "number")
    if base <= 0:
        raise CaseFormatError("case.base_mva: must be positive")
    ids = _field(doc, "buses", "case", "list")
    if len(set(map(str, ids))) != len(ids):
        raise CaseFormatError("case.buses: bus ids are not unique")
    index = {bid: k for k, bid in enumerate(ids)}
    slack_id = _field(doc, "slack_bus", "case")

    unknown = []

    def bus(bid, where):
        if bid not in index:
            unknown.append(f"{where} references unknown bus {bid!r}")
            return -1
        return index[bid]

    lines = []
    for k, ln in enumerate(_field(doc, "lines", "case", "list")):
        where = f"case.lines[{k}]"
        i = bus(_field(ln, "from", where), where)
        j = bus(_field(ln, "to", where), where)
        x = _field(ln, "reactance_pu", where, "number")
        lines.append((i, j, x))

    gens: dict[int, float] = {}
    for k, g in enumerate(_field(doc, "generators", "case", "list")):
        where = f"case.generators[{k}]"
        b = bus(_field(g, "bus", where), where)
        gens[b] = gens.get(b, 0.0) + _field(g, "p_max_mw", where, "number") / base

    loads: dict[int, float] = {}
    for k, ld in enumerate(_field(doc, "loads", "case", "list")):
        where = f"case.loads[{k}]"
        b = bus(_field(ld, "bus", where), where)
        loads[b] = loads.get(b, 0.0) + _field(ld, "p_mw", where, "number") / base

    slack = bus(slack_id, "case.slack_bus")
    if unknown:
        report = ValidationReport(errors=unknown)
        raise CaseValidationError(report)

    network = Network(
        n_buses=len(ids), slack_bus=slack, lines=tuple(lines),
        generators=gens, loads=loads, base_mva=base, bus_ids=tuple(ids),
    )
    if validate:
        report = validate_network(network)
        if not report.ok:
            raise CaseValidationError(report)
    return network


def load_case(path, validate: bool = True) -> Network:
    path = resolve_case(path)
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise CaseFormatError(f"cannot read case file {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise CaseFormatError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    return parse_case(doc, validate=validate)
