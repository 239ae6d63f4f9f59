"""Run configuration files (JSON), validated before anything executes."""

from __future__ import annotations

import copy
import json
from pathlib import Path

import jsonschema

from .adversary import EveStrategy
from .errors import ConfigError
from .model import PairSource
from .protocols import ProtocolKind, ProtocolSpec
from .session import SessionConfig

_UNIT = {"type": "number", "minimum": 0, "maximum": 1}
_PROBS = {
    "type": "object",
    "propertyNames": {"enum": ["HX", "HP", "DX", "DP"]},
    "additionalProperties": {"type": "number", "minimum": 0},
}

SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "spec_version": {"type": "string"},
        "protocol": {
            "oneOf": [
                {"enum": [k.value for k in ProtocolKind]},
                {
                    "type": "object",
                    "additionalProperties": False,
                    "required": ["kind"],
                    "properties": {
                        "kind": {"enum": [k.value for k in ProtocolKind]},
                        "basis_probabilities": {
                            "type": "object",
                            "additionalProperties": False,
                            "properties": {"A": _PROBS, "B": _PROBS},
                        },
                    },
                },
            ]
        },
        "source": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"v_pol": _UNIT, "v_x": _UNIT, "v_p": _UNIT, "bg": _UNIT},
        },
        "eve": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"intercept_fraction": _UNIT, "basis_policy": _PROBS},
        },
        "n_pairs": {"type": "integer", "minimum": 1},
        "disclose_fraction": {"type": "number", "minimum": 0, "exclusiveMaximum": 1},
        "abort_threshold": {"type": ["number", "null"], "minimum": 0},
        "seed": {"type": ["integer", "null"]},
        "transport": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "kind": {"enum": ["memory", "tcp"]},
                "host": {"type": "string"},
                "port": {"type": "integer", "minimum": 0, "maximum": 65535},
            },
        },
        "output": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"dir": {"type": "string"}, "format": {"enum": ["json", "csv"]}},
        },
        "scan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "fixed_theta": {"type": "number"},
                "thetas": {"type": "array", "items": {"type": "number"}},
                "n_angles": {"type": "integer", "minimum": 1},
                "n_per_point": {"type": "integer", "minimum": 1},
                "analytic": {"type": "boolean"},
            },
        },
        "table": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 1}},
        },
    },
}

DEFAULTS = {
    "protocol": "ParallelBBM",
    "source": {"v_pol": 1.0, "v_x": 0.95, "v_p": 0.95, "bg": 0.0},
    "eve": {"intercept_fraction": 0.0},
    "n_pairs": 10_000,
    "disclose_fraction": 0.1,
    "abort_threshold": None,
    "seed": None,
    "transport": {"kind": "memory", "host": "127.0.0.1", "port": 0},
    "output": {"dir": "qkd4_out", "format": "json"},
    "scan": {"fixed_theta": -45.0, "n_angles": 13, "n_per_point": 10_000, "analytic": False},
    "table": {"n": 10_000},
}


def validate(data: dict) -> None:
    try:
        jsonschema.validate(data, SCHEMA)
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None


def merged(data: dict) -> dict:
    """Validated ``data`` layered over the defaults (one level deep)."""
    validate(data)
    out = copy.deepcopy(DEFAULTS)
    for key, value in data.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = {**out[key], **value}
        else:
            out[key] = value
    return out


def load(path) -> dict:
    if path is None:
        return merged({})
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    return merged(data)


def build_source(cfg: dict) -> PairSource:
    return PairSource.from_params(**cfg["source"])


def build_session(cfg: dict, seed: int) -> SessionConfig:
    try:
        return SessionConfig(
            protocol=ProtocolSpec.from_dict(cfg["protocol"]),
            source=build_source(cfg),
            eve=EveStrategy(**cfg["eve"]),
            n_pairs=cfg["n_pairs"],
            disclose_fraction=cfg["disclose_fraction"],
            abort_threshold=cfg["abort_threshold"],
            master_seed=seed,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from None
