"""Experiment configuration for the batch runner.

A configuration is a JSON object with the fields of :class:`ExperimentConfig`.
Defaults: T = 1, rel_tol = 1e-10, quad_order = 16, m_max = 1_000_000,
tail_correction = true, p = [0], N = [8], samples = 100_000, seed = 12345,
workers = 1, format = "csv", out = null (standard output).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, fields

from .series import SeriesControl
from .spectral import SobolevOrder

COMMANDS = ("weak-error", "rate", "decompose", "mc-validate", "bounds", "strong-error")
# commands whose outputs are only meaningful in the h < 1 regime of the rate estimate
RATE_REGIME_COMMANDS = ("weak-error", "rate", "decompose", "strong-error")
FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid configuration; the message names the violated constraint."""


@dataclass(frozen=True)
class ExperimentConfig:
    command: str
    p: tuple = (0.0,)
    T: float = 1.0
    N: tuple = (8,)
    m_max: int = 1_000_000
    rel_tol: float = 1e-10
    quad_order: int = 16
    tail_correction: bool = True
    samples: int = 100_000
    seed: int = 12345
    workers: int = 1
    out: str | None = None
    format: str = "csv"

    def __post_init__(self):
        object.__setattr__(self, "p", tuple(float(v) for v in self.p))
        object.__setattr__(self, "N", tuple(int(v) for v in self.N))
        object.__setattr__(self, "T", float(self.T))
        object.__setattr__(self, "rel_tol", float(self.rel_tol))
        self.validate()

    def validate(self):
        if self.command not in COMMANDS:
            raise ConfigError(f"command must be one of {', '.join(COMMANDS)}; got {self.command!r}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be csv or json; got {self.format!r}")
        if not self.p:
            raise ConfigError("p must be a non-empty list")
        for v in self.p:
            try:
                SobolevOrder(v)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
        if not self.N:
            raise ConfigError("N must be a non-empty list of step counts")
        if any(n < 1 for n in self.N):
            raise ConfigError(f"every N must be >= 1; got {list(self.N)}")
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be positive; got {self.T!r}")
        if self.command in RATE_REGIME_COMMANDS:
            bad = [n for n in self.N if not self.T / n < 1.0]
            if bad:
                raise ConfigError(f"h = T/N must be < 1 for {self.command}; violated by N = {bad}")
        if self.command == "rate" and len(set(self.N)) < 3:
            raise ConfigError("rate needs at least 3 distinct N values")
        if self.samples < 2:
            raise ConfigError(f"samples must be >= 2; got {self.samples}")
        if not (0 <= self.seed < 2**64):
            raise ConfigError(f"seed must be a 64-bit unsigned integer; got {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers must be >= 1; got {self.workers}")
        try:
            self.series_control()
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    def series_control(self) -> SeriesControl:
        return SeriesControl(m_max=self.m_max, rel_tol=self.rel_tol,
                             quad_order=self.quad_order, tail_correction=self.tail_correction)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["p"] = list(self.p)
        d["N"] = list(self.N)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _type_name(kind):
    return {int: "integer", float: "number", bool: "boolean", str: "string"}[kind]


# expected JSON type per field: scalar type, or ("list", element type)
_SCHEMA = {
    "command": str,
    "p": ("list", float),
    "T": float,
    "N": ("list", int),
    "m_max": int,
    "rel_tol": float,
    "quad_order": int,
    "tail_correction": bool,
    "samples": int,
    "seed": int,
    "workers": int,
    "out": (str, None),
    "format": str,
}


def _check_scalar(value, kind, path):
    ok = {
        bool: isinstance(value, bool),
        int: isinstance(value, int) and not isinstance(value, bool),
        float: isinstance(value, (int, float)) and not isinstance(value, bool),
        str: isinstance(value, str),
    }[kind]
    if not ok:
        raise ConfigError(f"{path}: expected {_type_name(kind)}, got {type(value).__name__} {value!r}")


def _check_types(doc: dict):
    for key, value in doc.items():
        expected = _SCHEMA[key]
        path = f"$.{key}"
        if isinstance(expected, tuple) and expected[0] == "list":
            if not isinstance(value, list):
                raise ConfigError(f"{path}: expected list, got {type(value).__name__} {value!r}")
            for i, v in enumerate(value):
                _check_scalar(v, expected[1], f"{path}[{i}]")
        elif isinstance(expected, tuple):
            if value is not None:
                _check_scalar(value, expected[0], path)
        else:
            _check_scalar(value, expected, path)


def _normalize(doc: dict) -> dict:
    # accept scalars for the list-valued fields given as overrides
    out = dict(doc)
    for key in ("p", "N"):
        if key in out and not isinstance(out[key], list):
            out[key] = [out[key]]
    return out


def config_from_dict(doc: dict, overrides: dict | None = None) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError(f"$: expected a JSON object, got {type(doc).__name__}")
    known = {f.name for f in fields(ExperimentConfig)}
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
    merged = dict(doc)
    merged.update(_normalize({k: v for k, v in (overrides or {}).items() if v is not None}))
    _check_types(merged)
    if "command" not in merged:
        raise ConfigError("$.command: required field missing")
    return ExperimentConfig(**merged)


def parse_config(text: str, overrides: dict | None = None) -> ExperimentConfig:
    """Parse a JSON configuration document; non-None ``overrides`` take precedence."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed configuration document: {exc}") from None
    return config_from_dict(doc, overrides)
