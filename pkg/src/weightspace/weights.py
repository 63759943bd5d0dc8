"""Weight functions and empirical witnesses of their admissibility.

A weight is a nonnegative nondecreasing continuous function on ``[0, inf)``.
It is admissible when

1. ``w(x)/x`` grows without bound,
2. for every ``h > 1`` there is a constant with ``2 w(x) <= w(h x) + K_h``,
3. ``t -> w(e^t)`` is convex.

None of these can be proved on a grid; :func:`check_admissibility` records
witnesses for each and flags the grid when it is too short to see the tail.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .conjugate import _tail, conjugate_at, doubling_gap, nonincreasing
from .errors import InvalidParameterError, RegularizationError
from .grids import GridSpec, default_count

CONVEXITY_RTOL = 1e-9
SUPERLINEAR_THRESHOLD = 1e3


@dataclass(frozen=True)
class WeightFunction:
    """A named weight with an optional closed-form conjugate.

    ``evaluate`` maps a float array to a float array and may return ``inf``
    where the value overflows.  ``log_evaluate`` (when present) returns
    ``log w(x)`` without overflow and is used for ratio witnesses.
    """

    name: str
    params: dict
    evaluate: Callable
    exact_conjugate: Optional[Callable] = None
    convex_on_halfline: bool = False
    log_evaluate: Optional[Callable] = field(default=None, compare=False)

    def __call__(self, x):
        with np.errstate(over="ignore"):
            return self.evaluate(np.asarray(x, dtype=float))

    def label(self) -> str:
        if not self.params:
            return self.name
        inner = ",".join(f"{k}={v}" for k, v in self.params.items() if k not in ("xs", "vs"))
        return f"{self.name}({inner})" if inner else self.name


def _exp_power(alpha):
    def ev(x):
        with np.errstate(over="ignore"):
            return np.exp(np.maximum(x, 0.0) ** alpha)

    def log_ev(x):
        return np.maximum(x, 0.0) ** alpha

    return WeightFunction("exp_power", {"alpha": alpha}, ev, None, alpha >= 1.0, log_ev)


def _exp_conjugate(t):
    t = np.asarray(t, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        inner = np.where(t >= 1.0, t * np.log(np.maximum(t, 1.0)) - t, -1.0)
    return inner


def _power(p):
    def ev(x):
        with np.errstate(over="ignore"):
            return np.maximum(x, 0.0) ** p

    def conj(t):
        t = np.maximum(np.asarray(t, dtype=float), 0.0)
        return (p - 1.0) * (t / p) ** (p / (p - 1.0))

    def log_ev(x):
        with np.errstate(divide="ignore"):
            return p * np.log(np.maximum(x, 0.0))

    return WeightFunction("power", {"p": p}, ev, conj, True, log_ev)


def _table(xs, vs):
    xs = np.asarray(xs, dtype=float)
    vs = np.asarray(vs, dtype=float)
    if xs.size < 2 or xs.size != vs.size:
        raise InvalidParameterError("table weight needs at least two (x, value) pairs")
    if np.any(np.diff(xs) <= 0):
        raise InvalidParameterError("table weight abscissae must be strictly increasing")
    if np.any(np.diff(vs) < 0):
        raise InvalidParameterError("table weight values must be nondecreasing")
    last_slope = (vs[-1] - vs[-2]) / (xs[-1] - xs[-2])

    def ev(x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, xs, vs)
        beyond = x > xs[-1]
        return np.where(beyond, vs[-1] + last_slope * (x - xs[-1]), out)

    slopes = np.diff(vs) / np.diff(xs)
    convex = bool(np.all(np.diff(slopes) >= -CONVEXITY_RTOL * (1 + np.abs(slopes[:-1])))) if slopes.size > 1 else True
    return WeightFunction("table", {"xs": xs.tolist(), "vs": vs.tolist()}, ev, None, convex)


def make_weight(name: str, **params) -> WeightFunction:
    """Build a built-in weight.

    Parameters
    ----------
    name : {"exp_power", "exp", "power", "table"}
        ``exp_power(alpha)`` is ``exp(x**alpha)``; ``exp`` is ``exp(x)`` with a
        closed-form conjugate; ``power(p)`` is ``x**p`` (p > 1, not admissible:
        it fails the doubling condition); ``table(xs, vs)`` interpolates
        nondecreasing samples and extends linearly past the last one.
    """
    if name == "exp_power":
        alpha = float(params.get("alpha", 1.0))
        if not alpha > 0:
            raise InvalidParameterError(f"exp_power needs alpha > 0, got {alpha}")
        return _exp_power(alpha)
    if name == "exp":
        w = _exp_power(1.0)
        return WeightFunction("exp", {}, w.evaluate, _exp_conjugate, True, w.log_evaluate)
    if name == "power":
        p = float(params.get("p", 2.0))
        if not p > 1:
            raise InvalidParameterError(f"power needs p > 1, got {p}")
        return _power(p)
    if name == "table":
        if "xs" not in params or "vs" not in params:
            raise InvalidParameterError("table weight needs xs and vs")
        return _table(params["xs"], params["vs"])
    raise InvalidParameterError(f"unknown weight {name!r}; expected exp_power, exp, power or table")


def parse_weight(text: str) -> WeightFunction:
    """Parse ``name`` or ``name:key=value,...`` (``table:x0,v0,x1,v1,...``)."""
    name, _, rest = text.partition(":")
    name = name.strip()
    if name == "table":
        nums = [float(v) for v in rest.split(",") if v.strip()]
        if len(nums) % 2:
            raise InvalidParameterError("table weight needs an even number of values")
        return make_weight("table", xs=nums[0::2], vs=nums[1::2])
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            # bare value binds the single parameter of the family
            key, val = {"exp_power": "alpha", "power": "p"}.get(name, "value"), key
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise InvalidParameterError(f"weight parameter {key!r} must be numeric, got {val!r}") from None
    return make_weight(name, **params)


def compose_exp(w: WeightFunction) -> WeightFunction:
    """``t -> w(e^t)`` on the whole real line."""

    def ev(t):
        with np.errstate(over="ignore"):
            return w.evaluate(np.exp(np.asarray(t, dtype=float)))

    log_ev = None
    if w.log_evaluate is not None:
        def log_ev(t):
            with np.errstate(over="ignore"):
                return w.log_evaluate(np.exp(np.asarray(t, dtype=float)))

    convex = w.name in ("exp", "exp_power", "power")
    return WeightFunction(f"{w.name}[e]", dict(w.params), ev, None, convex, log_ev)


# --------------------------------------------------------------------------
# admissibility witnesses


@dataclass
class DoublingConstant:
    h: float
    K: float
    divergent: bool

    def to_dict(self):
        return {"h": self.h, "K": self.K, "divergent": self.divergent}


@dataclass
class AdmissibilityReport:
    weight: str
    superlinear_ok: bool
    superlinear_ratio: np.ndarray
    doubling_constants: list
    log_convexity_ok: bool
    worst_second_difference: float
    probe_grid: GridSpec
    warnings: list = field(default_factory=list)

    @property
    def admissible(self) -> bool:
        return self.superlinear_ok and self.log_convexity_ok and not any(d.divergent for d in self.doubling_constants)

    def to_dict(self):
        return {
            "weight": self.weight,
            "superlinear_ok": self.superlinear_ok,
            "superlinear_end_ratio": float(self.superlinear_ratio[-1]),
            "doubling_constants": [d.to_dict() for d in self.doubling_constants],
            "log_convexity_ok": self.log_convexity_ok,
            "worst_second_difference": self.worst_second_difference,
            "probe_grid": self.probe_grid.to_dict(),
            "warnings": list(self.warnings),
            "admissible": self.admissible,
        }


def _log_values(w: WeightFunction, x):
    if w.log_evaluate is not None:
        return np.asarray(w.log_evaluate(x), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.asarray(w(x), dtype=float))


def doubling_constant(w: WeightFunction, h: float, xs) -> DoublingConstant:
    """``K_h = max (2 w(x) - w(h x))`` over ``xs`` plus 0, with a tail witness.

    The constant is declared divergent unless the gap is nonincreasing on the
    last quarter of the x-range (by value, so log grids are treated fairly).
    """
    if not h > 1:
        raise InvalidParameterError(f"doubling factor must exceed 1, got {h}")
    xs = np.unique(np.concatenate([[0.0], np.asarray(xs, dtype=float)]))
    gap = doubling_gap(w(xs), w(h * xs))
    K = float(np.max(gap))
    tail_ok = nonincreasing(gap[xs >= 0.75 * xs[-1]])
    return DoublingConstant(float(h), K, not (tail_ok and math.isfinite(K)))


def doubling_condition_psi(psi: WeightFunction, h: float, grid=None) -> DoublingConstant:
    """Same constant written in the log variable: ``2 psi(t) - psi(t + ln h)``."""
    ts = (grid if grid is not None else GridSpec(-20.0, math.log(30.0), default_count())).points()
    gap = doubling_gap(psi(ts), psi(ts + math.log(h)))
    K = float(np.max(gap))
    tail_ok = nonincreasing(_tail(gap))
    return DoublingConstant(float(h), K, not (tail_ok and math.isfinite(K)))


def second_differences(values, rtol: float = CONVEXITY_RTOL):
    """Worst relative second difference of finite samples on a uniform grid."""
    v = np.asarray(values, dtype=float)
    fin = np.isfinite(v)
    triple = fin[:-2] & fin[1:-1] & fin[2:]
    with np.errstate(invalid="ignore"):
        d2 = v[:-2] - 2 * v[1:-1] + v[2:]
    rel = np.where(triple, d2 / (1.0 + np.abs(v[1:-1])), np.inf)
    worst = float(np.min(rel)) if rel.size else 0.0
    return worst >= -rtol, worst


def check_admissibility(
    w: WeightFunction,
    grid: Optional[GridSpec] = None,
    h_list: Sequence[float] = (1.5, 2.0, 4.0),
    threshold: float = SUPERLINEAR_THRESHOLD,
) -> AdmissibilityReport:
    """Witness the three admissibility conditions on a probe grid.

    Parameters
    ----------
    grid : GridSpec, optional
        Defaults to a log grid on ``[1e-3, 30]``; the convexity witness uses a
        uniform grid over ``[0, ln hi]`` in the log variable.
    h_list : sequence of float
        Factors for the doubling constants.
    threshold : float
        ``w(x)/x`` must exceed this at the end of the grid.
    """
    grid = grid or GridSpec(1e-3, 30.0, default_count(), "log")
    xs = grid.points()
    warnings = []

    with np.errstate(divide="ignore"):
        log_ratio = _log_values(w, xs) - np.log(xs)
    tail = _tail(log_ratio)
    superlinear = bool(np.all(np.diff(tail) > 0) and log_ratio[-1] > math.log(threshold))
    if xs[-1] < 10.0:
        warnings.append(f"grid ends at {xs[-1]:g}; too short to witness tail growth")

    doubling = [doubling_constant(w, h, xs) for h in h_list]

    hi = max(float(xs[-1]), 1.0 + 1e-9)
    ts = np.linspace(0.0, math.log(hi), default_count())
    psi_vals = w(np.exp(ts))
    convex_ok, worst = second_differences(psi_vals)
    if not np.all(np.isfinite(psi_vals)):
        cap = float(np.exp(ts[np.isfinite(psi_vals)][-1]))
        warnings.append(f"log-convexity window capped at x={cap:g} by overflow")

    return AdmissibilityReport(
        weight=w.label(),
        superlinear_ok=superlinear,
        superlinear_ratio=np.exp(np.minimum(log_ratio, 700.0)),
        doubling_constants=doubling,
        log_convexity_ok=convex_ok,
        worst_second_difference=worst,
        probe_grid=grid,
        warnings=warnings,
    )


# --------------------------------------------------------------------------
# regularization near zero


@dataclass
class Regularization:
    """A convex weight equal to ``w`` beyond ``d`` with measured conjugate gaps.

    ``s`` bounds ``|w* - w1*|`` and ``s1`` bounds the same gap for the
    log-variable compositions.
    """

    weight: WeightFunction
    s: float
    s1: float
    d: float
    exponent: float

    def to_dict(self):
        return {"d": self.d, "exponent": self.exponent, "s": self.s, "s1": self.s1, "weight": self.weight.name}


def regularize_at_zero(w: WeightFunction, d: float = 2.0, grid_count: int = 4097) -> Regularization:
    """Replace ``w`` on ``[0, d]`` by ``w(d) (x/d)^q`` so the result is convex.

    ``q = min(2, d * w'(d-) / w(d))`` makes the patch meet ``w`` at ``d`` with
    a slope no larger than ``w``'s left slope, and ``q > 1`` keeps
    ``t -> w1(e^t)`` convex on the patch (``e^{qt}`` scaled).  When the
    elasticity ``d w'(d)/w(d)`` is at most 1 no such patch exists and
    :class:`RegularizationError` asks for a larger ``d``.
    """
    if not d > 0:
        raise InvalidParameterError(f"d must be positive, got {d}")
    wd = float(w(np.array([d]))[0])
    if not (math.isfinite(wd) and wd > 0):
        raise RegularizationError(f"w(d) must be finite and positive, got {wd}")
    step = 1e-6 * d
    left_slope = (wd - float(w(np.array([d - step]))[0])) / step
    q = min(2.0, d * left_slope / wd)
    if q <= 1.0 + 1e-3:
        raise RegularizationError(f"d={d} too small: elasticity {q:.4g} <= 1; retry with a larger d")

    def ev(x):
        x = np.asarray(x, dtype=float)
        patch = wd * (np.clip(x, 0.0, d) / d) ** q
        return np.where(x <= d, patch, w.evaluate(np.maximum(x, d)))

    w1 = WeightFunction(f"{w.name}~", {**w.params, "d": d, "q": q}, ev, None, True, None)
    ok, worst = second_differences(w1(np.linspace(0.0, 4.0 * d, grid_count)))
    if not ok:
        raise RegularizationError(f"patched weight not convex on [0, 4d] (worst second difference {worst:.3g})")

    # conjugates differ only for slopes that select a maximizer below d
    w2d = float(w(np.array([2 * d]))[0])
    t_hi = 2.0 * (w2d - wd) / d if math.isfinite(w2d) else 2.0 * left_slope
    ts = np.linspace(0.0, max(t_hi, 1.0), 513)
    s = float(np.max(np.abs(conjugate_at(w, ts, hi=4 * d).values - conjugate_at(w1, ts, hi=4 * d).values)))

    s1 = 0.0
    if d > 1.0:
        psi, psi1 = compose_exp(w), compose_exp(w1)
        a = math.log(d)
        p2 = float(psi(np.array([a + math.log(2.0)]))[0])
        t1_hi = 2.0 * (p2 - float(psi(np.array([a]))[0])) / math.log(2.0) if math.isfinite(p2) else 4.0 * wd
        ts1 = np.linspace(0.0, max(t1_hi, 1.0), 513)
        up = a + math.log(4.0)
        s1 = float(np.max(np.abs(conjugate_at(psi, ts1, hi=up).values - conjugate_at(psi1, ts1, hi=up).values)))
    return Regularization(w1, s, s1, float(d), float(q))
