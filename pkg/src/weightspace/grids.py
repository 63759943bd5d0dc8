"""Probe grids shared by the weight, conjugate and norm routines."""
from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

#: Environment variable overriding the default probe-grid sample count.
GRID_COUNT_ENV = "WEIGHTSPACE_GRID_COUNT"


def default_count(fallback: int = 2048) -> int:
    """Sample count for default grids, honouring ``WEIGHTSPACE_GRID_COUNT``."""
    raw = os.environ.get(GRID_COUNT_ENV)
    if not raw:
        return fallback
    try:
        count = int(raw)
    except ValueError:
        raise ValueError(f"{GRID_COUNT_ENV} must be an integer, got {raw!r}") from None
    if count < 2:
        raise ValueError(f"{GRID_COUNT_ENV} must be >= 2, got {count}")
    return count


@dataclass(frozen=True)
class GridSpec:
    """A finite monotone grid ``lo .. hi`` with ``count`` samples.

    ``scale`` is ``"linear"`` or ``"log"``; a logarithmic grid needs ``lo > 0``.
    """

    lo: float
    hi: float
    count: int
    scale: str = "linear"

    def __post_init__(self):
        if not (np.isfinite(self.lo) and np.isfinite(self.hi)):
            raise ValueError("grid bounds must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"grid needs lo < hi, got lo={self.lo}, hi={self.hi}")
        if int(self.count) != self.count or self.count < 2:
            raise ValueError(f"grid count must be an integer >= 2, got {self.count}")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"grid scale must be 'linear' or 'log', got {self.scale!r}")
        if self.scale == "log" and self.lo <= 0:
            raise ValueError("logarithmic grid requires lo > 0")

    def points(self) -> np.ndarray:
        if self.scale == "log":
            pts = np.geomspace(self.lo, self.hi, int(self.count))
        else:
            pts = np.linspace(self.lo, self.hi, int(self.count))
        # geomspace can drift in the last ulp
        pts[0], pts[-1] = self.lo, self.hi
        return pts

    def doubled(self) -> "GridSpec":
        """Same spacing, twice the extent (symmetric grids grow on both sides)."""
        if self.scale == "log":
            return GridSpec(self.lo, self.hi * 2.0, int(self.count) * 2, "log")
        if self.lo == -self.hi:
            return GridSpec(-2 * self.hi, 2 * self.hi, 2 * int(self.count) - 1)
        width = self.hi - self.lo
        return GridSpec(self.lo, self.hi + width, 2 * int(self.count) - 1)

    @classmethod
    def parse(cls, text: str) -> "GridSpec":
        """Parse ``"lo,hi,count[,log|linear]"``."""
        parts = [p.strip() for p in text.split(",") if p.strip()]
        if len(parts) not in (3, 4):
            raise ValueError(f"grid must be 'lo,hi,count[,log]', got {text!r}")
        try:
            lo, hi = float(parts[0]), float(parts[1])
            count = int(parts[2])
        except ValueError:
            raise ValueError(f"grid must be 'lo,hi,count[,log]', got {text!r}") from None
        scale = "linear"
        if len(parts) == 4:
            scale = {"log": "log", "logarithmic": "log", "linear": "linear", "lin": "linear"}.get(parts[3])
            if scale is None:
                raise ValueError(f"unknown grid scale {parts[3]!r}")
        return cls(lo, hi, count, scale)

    def to_dict(self) -> dict:
        return {"lo": float(self.lo), "hi": float(self.hi), "count": int(self.count), "scale": self.scale}


def symmetric(half_width: float, count: int) -> GridSpec:
    """Symmetric linear grid on ``[-half_width, half_width]``; odd counts contain 0."""
    return GridSpec(-float(half_width), float(half_width), int(count))
