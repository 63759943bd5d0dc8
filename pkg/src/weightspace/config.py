"""Line-oriented run configuration.

One ``key = value`` pair per line; ``#`` starts a comment.  Keys that hold
lists (``epsilon``, ``function``, ``check``, ...) may be repeated, and a
single line may also carry a comma-separated list where the values cannot
contain commas themselves.  ``grid.<name> = lo,hi,count[,log]`` overrides a
probe grid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List

from .errors import InvalidParameterError
from .grids import GridSpec

CHECKS = (
    "admissibility",
    "conjugate",
    "lemma1",
    "lemma2",
    "lemma3",
    "lemma4",
    "eq21",
    "corollary1",
    "theorem1",
    "theorem2",
    "theorem3",
    "theorem4",
)
FORMATS = ("csv", "json", "svg")
GRID_NAMES = (
    "weight",
    "conjugate_x",
    "lemma1_x",
    "lemma4_x",
    "eq21_x",
    "theorem1_x",
    "theorem3_x",
    "theorem4_x",
)
EQ21_CHOICES = ("half_square", "weight")

# key -> (kind, is_list)
_SCHEMA = {
    "weight": ("str", False),
    "sigma": ("float", False),
    "epsilon": ("float", True),
    "function": ("str", True),
    "check": ("name", True),
    "format": ("name", True),
    "output_dir": ("str", False),
    "h": ("float", True),
    "lemma1_M": ("float", True),
    "lemma2_epsilon": ("float", True),
    "lemma4_delta": ("float", False),
    "b": ("float", True),
    "eq21_u": ("str", False),
    "regularization_d": ("float", False),
    "m_max": ("int", False),
    "n_max": ("int", False),
    "k_max": ("int", False),
}


class ConfigError(InvalidParameterError):
    """Malformed or invalid configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None, field_name=None):
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)
        self.line = line
        self.field = field_name


@dataclass
class RunConfig:
    weight: str = "exp"
    sigma: float = 1.0
    epsilons: List[float] = field(default_factory=lambda: [0.5, 1.0])
    functions: List[str] = field(default_factory=lambda: ["gaussian"])
    checks: List[str] = field(default_factory=list)
    grids: Dict[str, GridSpec] = field(default_factory=dict)
    output_dir: str = "weightspace-report"
    formats: List[str] = field(default_factory=lambda: ["csv", "json"])
    h_list: List[float] = field(default_factory=lambda: [1.5, 2.0, 4.0])
    lemma1_M: List[float] = field(default_factory=lambda: [math.e, 1.0])
    lemma2_epsilons: List[float] = field(default_factory=lambda: [0.25, 0.5])
    lemma4_delta: float = 0.5
    series_b: List[float] = field(default_factory=lambda: [10.0])
    eq21_u: str = "half_square"
    regularization_d: float = 2.0
    m_max: int = 2
    n_max: int = 12
    k_max: int = 400

    def validate(self) -> "RunConfig":
        from .entire import parse_function
        from .weights import parse_weight

        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ConfigError(f"sigma must be positive, got {self.sigma}", field_name="sigma")
        if not self.epsilons or any(not e > 0 for e in self.epsilons):
            raise ConfigError("epsilon values must be positive", field_name="epsilon")
        self.epsilons = sorted(self.epsilons)
        if not self.checks:
            raise ConfigError("at least one check is required (key 'check')", field_name="check")
        for c in self.checks:
            if c not in CHECKS:
                raise ConfigError(f"unknown check {c!r}; valid checks: {', '.join(CHECKS)}", field_name="check")
        for fmt in self.formats:
            if fmt not in FORMATS:
                raise ConfigError(f"unknown format {fmt!r}; valid formats: {', '.join(FORMATS)}", field_name="format")
        if any(not h > 1 for h in self.h_list):
            raise ConfigError("h values must exceed 1", field_name="h")
        if any(not m > 0 for m in self.lemma1_M):
            raise ConfigError("lemma1_M values must be positive", field_name="lemma1_M")
        if any(not e > 0 for e in self.lemma2_epsilons):
            raise ConfigError("lemma2_epsilon values must be positive", field_name="lemma2_epsilon")
        if not self.lemma4_delta > 0:
            raise ConfigError("lemma4_delta must be positive", field_name="lemma4_delta")
        if any(not b > 0 for b in self.series_b):
            raise ConfigError("b values must be positive", field_name="b")
        if not self.regularization_d > 0:
            raise ConfigError("regularization_d must be positive", field_name="regularization_d")
        if self.eq21_u not in EQ21_CHOICES:
            raise ConfigError(f"eq21_u must be one of {', '.join(EQ21_CHOICES)}", field_name="eq21_u")
        for name, lo, hi in (("m_max", 0, 8), ("n_max", 1, 60), ("k_max", 10, 2000)):
            v = getattr(self, name)
            if not lo <= v <= hi:
                raise ConfigError(f"{name} must lie in [{lo}, {hi}], got {v}", field_name=name)
        try:
            parse_weight(self.weight)
        except (InvalidParameterError, ValueError) as exc:
            raise ConfigError(f"weight: {exc}", field_name="weight") from None
        for fn in self.functions:
            try:
                parse_function(fn)
            except (InvalidParameterError, ValueError, TypeError) as exc:
                raise ConfigError(f"function: {exc}", field_name="function") from None
        return self

    def to_dict(self) -> dict:
        return {
            "weight": self.weight,
            "sigma": self.sigma,
            "epsilons": list(self.epsilons),
            "functions": list(self.functions),
            "checks": list(self.checks),
            "grids": {k: v.to_dict() for k, v in sorted(self.grids.items())},
            "formats": list(self.formats),
            "h": list(self.h_list),
            "lemma1_M": list(self.lemma1_M),
            "lemma2_epsilon": list(self.lemma2_epsilons),
            "lemma4_delta": self.lemma4_delta,
            "b": list(self.series_b),
            "eq21_u": self.eq21_u,
            "regularization_d": self.regularization_d,
            "m_max": self.m_max,
            "n_max": self.n_max,
            "k_max": self.k_max,
        }


_ALIASES = {"checks": "check", "epsilons": "epsilon", "functions": "function", "formats": "format"}

_ATTR = {
    "epsilon": "epsilons",
    "function": "functions",
    "check": "checks",
    "format": "formats",
    "h": "h_list",
    "lemma2_epsilon": "lemma2_epsilons",
    "b": "series_b",
}


def _convert(kind, raw, key, lineno):
    try:
        if kind == "float":
            return math.e if raw == "e" else float(raw)
        if kind == "int":
            return int(raw)
    except ValueError:
        raise ConfigError(f"{key} expects a {kind}, got {raw!r}", lineno, key) from None
    return raw


def parse_config(text: str) -> RunConfig:
    """Parse and validate a configuration document."""
    values: dict = {}
    grids: Dict[str, GridSpec] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, eq, val = line.partition("=")
        key, val = key.strip(), val.strip()
        key = _ALIASES.get(key, key)
        if not eq or not key:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if not val:
            raise ConfigError(f"empty value for {key!r}", lineno, key)
        if key.startswith("grid."):
            name = key[5:]
            if name not in GRID_NAMES:
                raise ConfigError(f"unknown grid {name!r}; valid grids: {', '.join(GRID_NAMES)}", lineno, key)
            try:
                grids[name] = GridSpec.parse(val)
            except ValueError as exc:
                raise ConfigError(str(exc), lineno, key) from None
            continue
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key {key!r}", lineno, key)
        kind, is_list = _SCHEMA[key]
        if is_list:
            # names and floats may be comma separated; function specs may not
            parts = [val] if kind == "str" else [p.strip() for p in val.split(",") if p.strip()]
            values.setdefault(key, []).extend(_convert(kind, p, key, lineno) for p in parts)
        else:
            if key in values:
                raise ConfigError(f"{key!r} given more than once", lineno, key)
            values[key] = _convert(kind, val, key, lineno)
    cfg = RunConfig()
    for key, v in values.items():
        setattr(cfg, _ATTR.get(key, key), v)
    cfg.grids = grids
    return cfg.validate()
