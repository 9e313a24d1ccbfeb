"""JSON formats for economies, allocations, prices and reports.

Every document carries ``schema_version``; inputs are validated against the
schemas below before being turned into model objects.
"""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema
import numpy as np

from .economy import PLC, Consumer, Economy, ShiftedPower, check_allocation, check_replica_allocation
from .exceptions import InputError

SCHEMA_VERSION = 1

_vector = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_version = {"const": SCHEMA_VERSION}

_utility = {
    "oneOf": [
        {"type": "object", "required": ["family", "rho", "theta"],
         "properties": {"family": {"const": "shifted_power"}, "rho": {"type": "number"},
                        "theta": {"type": "number"}, "N": {"type": "number"}},
         "additionalProperties": False},
        {"type": "object", "required": ["family", "U", "T"],
         "properties": {"family": {"const": "plc"}, "U": _matrix, "T": _vector},
         "additionalProperties": False},
    ]
}

SCHEMAS = {
    "economy": {
        "type": "object", "required": ["schema_version", "num_goods", "consumers"],
        "properties": {
            "schema_version": _version,
            "num_goods": {"type": "integer", "minimum": 1},
            "consumers": {"type": "array", "minItems": 1, "items": {
                "type": "object", "required": ["endowment", "utility"],
                "properties": {"endowment": _vector, "utility": _utility}}},
        },
    },
    "allocation": {
        "type": "object", "required": ["schema_version", "bundles"],
        "properties": {"schema_version": _version, "bundles": _matrix,
                       "n": {"type": "integer", "minimum": 1}},
    },
    "price": {
        "type": "object", "required": ["schema_version", "price"],
        "properties": {"schema_version": _version, "price": _vector},
    },
    "report": {
        "type": "object", "required": ["schema_version", "command"],
        "properties": {"schema_version": _version, "command": {"type": "string"}},
    },
}


def validate(doc, kind: str):
    try:
        jsonschema.validate(doc, SCHEMAS[kind])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InputError(f"invalid {kind} document at {where}: {exc.message}") from None


def parse_json(text: str, source: str = "<input>"):
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        line = text.splitlines()[exc.lineno - 1] if text.splitlines() else ""
        raise InputError(
            f"{source}:{exc.lineno}:{exc.colno}: malformed JSON ({exc.msg})\n    {line}") from None


def load_json(path, kind: str):
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise InputError(f"cannot read {p}: {exc}") from None
    doc = parse_json(text, str(p))
    validate(doc, kind)
    return doc


def utility_from_dict(d):
    if d["family"] == "shifted_power":
        return ShiftedPower(d["rho"], d["theta"], d.get("N", 1.0))
    return PLC(np.array(d["U"], dtype=float), np.array(d["T"], dtype=float))


def utility_to_dict(u):
    if isinstance(u, ShiftedPower):
        return {"family": "shifted_power", "rho": u.rho, "theta": u.theta, "N": u.N}
    return {"family": "plc", "U": u.U.tolist(), "T": u.T.tolist()}


def economy_from_dict(d) -> Economy:
    validate(d, "economy")
    consumers = tuple(Consumer(np.array(c["endowment"], dtype=float),
                               utility_from_dict(c["utility"])) for c in d["consumers"])
    return Economy(int(d["num_goods"]), consumers)


def economy_to_dict(e: Economy):
    return {"schema_version": SCHEMA_VERSION, "num_goods": e.num_goods,
            "consumers": [{"endowment": c.endowment.tolist(),
                           "utility": utility_to_dict(c.utility)} for c in e.consumers]}


def allocation_to_dict(bundles, n: int | None = None):
    d = {"schema_version": SCHEMA_VERSION, "bundles": np.asarray(bundles).tolist()}
    if n is not None:
        d["n"] = int(n)
    return d


def load_economy(path) -> Economy:
    return economy_from_dict(load_json(path, "economy"))


def load_allocation(path, economy: Economy):
    doc = load_json(path, "allocation")
    return check_allocation(economy, doc["bundles"])


def load_replica_allocation(path, economy: Economy, n: int | None = None):
    doc = load_json(path, "allocation")
    n = doc.get("n", n)
    if n is None:
        raise InputError("replica allocation needs a replication factor 'n'")
    return check_replica_allocation(economy, int(n), doc["bundles"])


def load_price(path):
    return np.array(load_json(path, "price")["price"], dtype=float)


def report(command: str, body: dict) -> dict:
    out = {"schema_version": SCHEMA_VERSION, "command": command}
    out.update(body)
    return out


def dumps(doc) -> str:
    return json.dumps(doc, indent=2, sort_keys=True, default=_default)


def _default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, np.generic):
        return o.item()
    raise TypeError(f"cannot serialise {type(o).__name__}")
