"""Young (Legendre-Fenchel) conjugates on grids and the conjugacy lemmas.

Two routes compute a discrete conjugate ``g*(x) = max_i (x*y_i - g(y_i))``:
a quadratic scan over all samples, and a lower-convex-hull merge that sorts
the hull slopes once and locates each ``x`` by binary search.  Both return
the same maximum over the same samples.

:func:`conjugate_at` is the accurate point evaluator: a grid scan followed by
a vectorized golden-section polish inside the bracketing cell.
"""
from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np
from scipy.special import gammaln, xlogy

from .errors import DivergenceSuspected, InvalidParameterError, PreconditionError
from .grids import GridSpec

CONVEXITY_RTOL = 1e-9
TRUNCATION_FRACTION = 0.05
_INVPHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass
class GridFunction:
    """Samples of a real function on a strictly increasing grid.

    ``maximizers``/``at_lower``/``at_upper`` are filled in when the samples are
    a conjugate: the arg-max in the primal variable and whether it sat on the
    first or last primal sample.
    """

    xs: np.ndarray
    values: np.ndarray
    meta: dict = field(default_factory=dict)
    maximizers: Optional[np.ndarray] = None
    at_lower: Optional[np.ndarray] = None
    at_upper: Optional[np.ndarray] = None

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.xs.ndim != 1 or self.xs.shape != self.values.shape:
            raise InvalidParameterError("GridFunction needs 1-D xs and values of equal length")
        if self.xs.size and np.any(np.diff(self.xs) <= 0):
            raise InvalidParameterError("GridFunction xs must be strictly increasing")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("GridFunction values must be finite")

    def __len__(self):
        return self.xs.size

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < self.xs[0] - 1e-12 * (1 + abs(self.xs[0]))) or np.any(
            x > self.xs[-1] + 1e-12 * (1 + abs(self.xs[-1]))
        ):
            raise InvalidParameterError("GridFunction evaluated outside its sample range")
        return np.interp(x, self.xs, self.values)

    def slopes(self) -> np.ndarray:
        return np.diff(self.values) / np.diff(self.xs)

    def is_convex(self, rtol: float = CONVEXITY_RTOL) -> bool:
        s = self.slopes()
        if s.size < 2:
            return True
        return bool(np.all(np.diff(s) >= -rtol * (1.0 + np.abs(s[:-1]))))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("# meta: " + json.dumps(_jsonable(self.meta), sort_keys=True) + "\n")
        buf.write("x,value\n")
        for x, v in zip(self.xs, self.values):
            buf.write(f"{fmt_float(x)},{fmt_float(v)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridFunction":
        meta = {}
        xs, vals = [], []
        header_seen = False
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("# meta:"):
                meta = json.loads(line[len("# meta:"):])
                continue
            if line.startswith("#"):
                continue
            if not header_seen:
                if line != "x,value":
                    raise InvalidParameterError(f"expected header 'x,value', got {line!r}")
                header_seen = True
                continue
            a, b = line.split(",")
            xs.append(float(a))
            vals.append(float(b))
        return cls(np.array(xs), np.array(vals), meta)


def fmt_float(x) -> str:
    """Shortest round-trip representation (at most 17 significant digits)."""
    x = float(x)
    if math.isnan(x):
        return "nan"
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(x)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else fmt_float(x)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


# --------------------------------------------------------------------------
# discrete conjugates


def _as_points(grid) -> np.ndarray:
    if isinstance(grid, GridSpec):
        return grid.points()
    return np.atleast_1d(np.asarray(grid, dtype=float))


def _scan(ys, gv, xs, chunk=512):
    """Quadratic scan: returns (values, argmax indices)."""
    vals = np.empty(xs.size)
    idx = np.empty(xs.size, dtype=int)
    rows = np.arange(min(chunk, xs.size))
    for start in range(0, xs.size, chunk):
        xb = xs[start:start + chunk]
        block = xb[:, None] * ys[None, :] - gv[None, :]
        i = np.argmax(block, axis=1)
        idx[start:start + xb.size] = i
        vals[start:start + xb.size] = block[rows[: xb.size], i]
    return vals, idx


def _lower_hull(ys, gv):
    """Indices of the lower convex hull of the points (ys, gv), ys increasing."""
    hull = []
    for i in range(ys.size):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            cross = (ys[b] - ys[a]) * (gv[i] - gv[a]) - (gv[b] - gv[a]) * (ys[i] - ys[a])
            if cross <= 0:
                hull.pop()
            else:
                break
        hull.append(i)
    return np.asarray(hull, dtype=int)


def _hull_merge(ys, gv, xs):
    """Conjugate through the lower hull: the arg-max for ``x`` is the first hull
    vertex whose outgoing slope is >= x."""
    hull = _lower_hull(ys, gv)
    hy, hg = ys[hull], gv[hull]
    slopes = np.diff(hg) / np.diff(hy)
    pos = np.searchsorted(slopes, xs, side="left")
    idx = hull[pos]
    return xs * ys[idx] - gv[idx], idx


def discrete_conjugate(ys, gv, xs, method="scan"):
    """Max over samples of ``x*y - g(y)``; non-finite samples of g are skipped.

    Returns ``(values, argmax_indices)`` with indices into the original ``ys``.
    """
    ys = np.asarray(ys, dtype=float)
    gv = np.asarray(gv, dtype=float)
    xs = np.asarray(xs, dtype=float)
    keep = np.flatnonzero(np.isfinite(gv))
    if keep.size == 0:
        raise InvalidParameterError("g is not finite at any sample")
    if method == "hull":
        vals, i = _hull_merge(ys[keep], gv[keep], xs)
    elif method == "scan":
        vals, i = _scan(ys[keep], gv[keep], xs)
    else:
        raise InvalidParameterError(f"unknown conjugate method {method!r}")
    return vals, keep[i]


def _evaluate(g, ys):
    with np.errstate(over="ignore", invalid="ignore"):
        return np.asarray(g(ys), dtype=float)


def young_conjugate(g, y_grid=None, x_grid=None, *, convex=None, method="auto") -> GridFunction:
    """Discrete Young conjugate ``g*(x) = max_{y in grid} (x*y - g(y))``.

    Parameters
    ----------
    g : callable or GridFunction
        Evaluator (then ``y_grid`` is required and must start at ``lo > 0``)
        or tabulated samples, which are used as the primal grid.
    y_grid, x_grid : GridSpec or array
    convex : bool, optional
        Claim that g is convex; selects the hull merge.  Defaults to the
        ``convex_on_halfline`` attribute of g when present.
    method : {"auto", "scan", "hull"}

    Returns
    -------
    GridFunction
        Conjugate samples on ``x_grid``; ``at_lower``/``at_upper`` flag
        arg-maxes on the first/last primal sample.  ``meta["truncation_warning"]``
        is set when more than 5% of the arg-maxes hit the last sample.
    """
    if x_grid is None:
        raise InvalidParameterError("x_grid is required")
    xs = _as_points(x_grid)
    if isinstance(g, GridFunction):
        ys, gv = g.xs, g.values
        name = g.meta.get("name", "table")
        if convex is None:
            convex = g.is_convex()
    else:
        if y_grid is None:
            raise InvalidParameterError("y_grid is required for an evaluator")
        ys = _as_points(y_grid)
        if ys[0] <= 0:
            raise InvalidParameterError("y_grid must start at lo > 0 (sup over y > 0)")
        gv = _evaluate(g, ys)
        name = getattr(g, "name", getattr(g, "__name__", "g"))
        if convex is None:
            convex = bool(getattr(g, "convex_on_halfline", False))
    if method == "auto":
        method = "hull" if convex else "scan"
    vals, idx = discrete_conjugate(ys, gv, xs, method=method)
    at_lower = idx == 0
    at_upper = idx == ys.size - 1
    upper_frac = float(np.mean(at_upper)) if xs.size else 0.0
    meta = {
        "source": "young_conjugate",
        "of": str(name),
        "method": method,
        "y_lo": float(ys[0]),
        "y_hi": float(ys[-1]),
        "y_count": int(ys.size),
        "lower_boundary_fraction": float(np.mean(at_lower)) if xs.size else 0.0,
        "upper_boundary_fraction": upper_frac,
        "truncation_warning": upper_frac > TRUNCATION_FRACTION,
    }
    return GridFunction(xs, vals, meta, ys[idx], at_lower, at_upper)


# --------------------------------------------------------------------------
# accurate point conjugates


def auto_upper(g, x_max: float, lo: float = 0.0, cap: float = 1e6) -> float:
    """Upper end of a primal window holding the maximizer for every slope <= x_max.

    For convex g, once the chord slope over ``[mid, Y]`` exceeds ``x_max`` the
    maximizer of ``x*y - g(y)`` lies below ``Y``.
    """
    span = 1.0
    while lo + span < cap:
        hi = lo + span
        g_hi = float(_evaluate(g, np.array([hi]))[0])
        if not np.isfinite(g_hi):
            return hi
        g_mid = float(_evaluate(g, np.array([lo + span / 2]))[0])
        if (g_hi - g_mid) / (span / 2) > x_max:
            return hi
        span *= 2.0
    return cap


@dataclass
class PointConjugate:
    values: np.ndarray
    maximizers: np.ndarray
    at_lower: np.ndarray
    at_upper: np.ndarray
    window: tuple


def golden_max(objective, a, b, iters=90):
    """Vectorized golden-section maximization of ``objective(t, lane)`` on ``[a, b]``."""
    a = np.array(a, dtype=float)
    b = np.array(b, dtype=float)
    lanes = np.arange(a.size)
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc = objective(c, lanes)
    fd = objective(d, lanes)
    for _ in range(iters):
        left = fc >= fd
        # keep [a, d] where the left probe wins, else [c, b]
        b = np.where(left, d, b)
        a = np.where(left, a, c)
        new_c = b - _INVPHI * (b - a)
        new_d = a + _INVPHI * (b - a)
        probe = np.where(left, new_c, new_d)
        fp = objective(probe, lanes)
        # left move: old c becomes d, probe is the new c; right move: old d becomes c
        c, fc, d, fd = (
            np.where(left, probe, d),
            np.where(left, fp, fd),
            np.where(left, c, probe),
            np.where(left, fc, fp),
        )
        if np.all(b - a <= 1e-15 * (1.0 + np.abs(a) + np.abs(b))):
            break
    pick_c = fc >= fd
    return np.where(pick_c, c, d), np.where(pick_c, fc, fd)


def conjugate_at(g, x, lo: float = 0.0, hi: Optional[float] = None, count: int = 2049) -> PointConjugate:
    """Accurate ``sup_{lo <= y <= hi} (x*y - g(y))`` for each ``x``.

    ``lo = 0`` stands for the open half line ``y > 0``: g is continuous, so
    the supremum over ``y > 0`` equals the maximum over the closure.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if hi is None:
        hi = auto_upper(g, float(np.max(np.abs(x))) if x.size else 1.0, lo)
    ys = np.linspace(lo, hi, int(count))
    gv = _evaluate(g, ys)
    vals, idx = discrete_conjugate(ys, gv, x, method="scan")
    left = ys[np.maximum(idx - 1, 0)]
    right = ys[np.minimum(idx + 1, ys.size - 1)]

    def objective(t, lanes):
        with np.errstate(over="ignore", invalid="ignore"):
            out = x[lanes] * t - np.asarray(g(t), dtype=float)
        return np.where(np.isnan(out), -np.inf, out)

    t_best, f_best = golden_max(objective, left, right)
    better = f_best > vals
    values = np.where(better, f_best, vals)
    argmax = np.where(better, t_best, ys[idx])
    return PointConjugate(values, argmax, idx == 0, idx == ys.size - 1, (float(lo), float(hi)))


# --------------------------------------------------------------------------
# biconjugate and Fenchel-Young


@dataclass
class ConjugacyReport:
    conjugate: GridFunction
    fenchel_young_worst_gap: float
    biconjugate_max_dev: float
    slopes_monotone: bool
    scale: float
    divergent_columns: int
    probe: np.ndarray
    biconjugate: np.ndarray
    interior: np.ndarray

    def to_dict(self) -> dict:
        return {
            "fenchel_young_worst_gap": self.fenchel_young_worst_gap,
            "biconjugate_max_dev": self.biconjugate_max_dev,
            "slopes_monotone": self.slopes_monotone,
            "scale": self.scale,
            "divergent_columns": self.divergent_columns,
            "interior_probes": int(np.count_nonzero(self.interior)),
            "conjugate_meta": self.conjugate.meta,
        }


def fenchel_young_gap(ys, gv, xs, gstar, chunk=512) -> float:
    """min over all pairs of ``g(y) + g*(x) - x*y``."""
    worst = np.inf
    fin = np.isfinite(gv)
    ys, gv = ys[fin], gv[fin]
    for start in range(0, xs.size, chunk):
        xb = xs[start:start + chunk]
        gap = gv[None, :] + gstar[start:start + chunk, None] - xb[:, None] * ys[None, :]
        worst = min(worst, float(gap.min()))
    return worst


def slopes_nondecreasing(gf: GridFunction, rtol: float = CONVEXITY_RTOL) -> bool:
    return gf.is_convex(rtol)


def biconjugate_check(g, y_grid=None, x_grid=None, probe=None) -> ConjugacyReport:
    """Conjugate g twice and compare ``(g*)*`` with g on interior probes.

    Columns of ``g*`` whose maximizer sits on the last primal sample are
    divergent (the true supremum lies beyond the window) and are dropped
    before the second pass.  A probe is interior when its second-pass
    maximizer avoids both ends of the surviving columns.
    """
    y_grid = y_grid if y_grid is not None else GridSpec(1e-6, 10.0, 4096)
    x_grid = x_grid if x_grid is not None else GridSpec(0.0, 20.0, 4096)
    probe = _as_points(probe if probe is not None else GridSpec(0.5, 5.0, 256))
    ys = _as_points(y_grid)
    gv = _evaluate(g, ys)
    gstar = young_conjugate(g, ys, x_grid, convex=getattr(g, "convex_on_halfline", None) or False)
    scale = float(max(1.0, np.max(np.abs(gstar.values)), np.max(np.abs(gv[np.isfinite(gv)]))))
    gap = fenchel_young_gap(ys, gv, gstar.xs, gstar.values)
    valid = ~gstar.at_upper
    divergent = int(np.count_nonzero(~valid))
    bic = np.full(probe.size, np.nan)
    interior = np.zeros(probe.size, dtype=bool)
    if np.count_nonzero(valid) >= 2:
        us, gs = gstar.xs[valid], gstar.values[valid]
        vals, idx = discrete_conjugate(us, gs, probe, method="hull")
        interior = (idx > 0) & (idx < us.size - 1)
        bic = vals
    dev = np.nan
    if np.any(interior):
        dev = float(np.max(np.abs(bic[interior] - _evaluate(g, probe[interior]))))
    return ConjugacyReport(
        conjugate=gstar,
        fenchel_young_worst_gap=gap,
        biconjugate_max_dev=dev,
        slopes_monotone=slopes_nondecreasing(gstar),
        scale=scale,
        divergent_columns=divergent,
        probe=probe,
        biconjugate=bic,
        interior=interior,
    )


# --------------------------------------------------------------------------
# helpers shared by the lemma checks


def nonincreasing(values, rtol: float = 1e-12) -> bool:
    """True when the sequence never rises (``-inf`` runs are allowed)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return True
    prev, nxt = v[:-1], v[1:]
    with np.errstate(invalid="ignore"):
        ok = (nxt <= prev + rtol * (1.0 + np.abs(prev))) | (np.isneginf(prev) & np.isneginf(nxt))
    ok |= np.isneginf(nxt)
    ok &= ~np.isnan(nxt)
    return bool(np.all(ok))


def doubling_gap(a, b):
    """``2a - b`` for values that may have overflowed to ``+inf``.

    Both infinite: the gap is taken as ``-inf`` (the shifted value dominates for
    nondecreasing superlinear inputs); callers record that the window was capped.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    with np.errstate(invalid="ignore", over="ignore"):
        out = 2.0 * a - b
    out = np.where(np.isinf(b) & np.isposinf(b), -np.inf, out)
    return np.where(np.isnan(out), -np.inf, out)


def _tail(arr, frac=0.25):
    n = arr.size
    start = int(math.floor(n * (1 - frac)))
    return arr[min(start, max(n - 2, 0)):]


# --------------------------------------------------------------------------
# Lemma-style checks


@dataclass
class LogGrowthResult:
    M: float
    A_M: float
    worst_margin: float
    worst_relative_margin: float
    tail_ok: bool
    xs: np.ndarray
    margins: np.ndarray

    @property
    def ok(self) -> bool:
        return self.tail_ok and self.worst_relative_margin >= -1e-6

    def to_dict(self):
        return {
            "M": self.M,
            "A_M": self.A_M,
            "worst_margin": self.worst_margin,
            "worst_relative_margin": self.worst_relative_margin,
            "tail_ok": self.tail_ok,
            "A_M_reliable": self.tail_ok,
        }


def lemma1_check(psi, M: float, y_grid=None, x_grid=None) -> LogGrowthResult:
    """Fit ``A_M = max_y (M e^y - psi(y))`` and test
    ``psi*(x) <= x ln(x/M) - x + A_M`` on the x-grid.

    The margin at each x must be ``>= -1e-6 (1 + x)``.
    """
    if not M > 0:
        raise InvalidParameterError("M must be positive")
    ys = _as_points(y_grid if y_grid is not None else GridSpec(0.0, 8.0, 4097))
    xs = _as_points(x_grid if x_grid is not None else GridSpec(0.01, 50.0, 500))
    with np.errstate(over="ignore", invalid="ignore"):
        gap = M * np.exp(ys) - _evaluate(psi, ys)
    gap = np.where(np.isnan(gap), -np.inf, gap)
    A = float(np.max(gap))
    tail_ok = nonincreasing(_tail(gap))
    pstar = conjugate_at(psi, xs, lo=max(0.0, float(ys[0]))).values
    bound = xlogy(xs, xs / M) - xs + A
    margins = bound - pstar
    return LogGrowthResult(
        M=float(M),
        A_M=A,
        worst_margin=float(np.min(margins)),
        worst_relative_margin=float(np.min(margins / (1.0 + xs))),
        tail_ok=tail_ok,
        xs=xs,
        margins=margins,
    )


@dataclass
class DoublingForwardResult:
    epsilon: float
    B: float
    inf_g: float
    C: float
    C_alt: float
    worst_violation: float
    worst_violation_alt: float
    scale: float
    b_tail_ok: bool

    @property
    def ok(self) -> bool:
        return self.worst_violation <= 1e-6 * self.scale

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "B_eps": self.B,
            "inf_g": self.inf_g,
            "C_eps": self.C,
            "C_eps_neg_inf_candidate": self.C_alt,
            "worst_violation": self.worst_violation,
            "worst_violation_neg_inf_candidate": self.worst_violation_alt,
            "scale": self.scale,
            "B_tail_ok": self.b_tail_ok,
        }


def doubling_constant_shift(g, eps: float, grid=None):
    """``max_x (2 g(x) - g(x + eps))`` on a grid over ``x >= 0`` with its tail witness."""
    xs = _as_points(grid if grid is not None else GridSpec(0.0, 10.0, 4097))
    gap = doubling_gap(_evaluate(g, xs), _evaluate(g, xs + eps))
    return float(np.max(gap)), nonincreasing(_tail(gap)), xs


def lemma2_forward_check(g, eps: float, pair_grid=None, b_grid=None, y_hi=None) -> DoublingForwardResult:
    """Approximate subadditivity of ``g*`` with ``C = max(B_eps, inf g)``.

    ``B_eps = max (2 g(x) - g(x + eps))`` must be finite with a decreasing
    tail; otherwise :class:`PreconditionError` is raised.  The conjugate is
    evaluated accurately at every grid point and every pairwise sum.  The
    alternative constant ``max(B_eps, -inf g)`` is reported alongside.
    """
    if not eps > 0:
        raise InvalidParameterError("eps must be positive")
    B, tail_ok, bxs = doubling_constant_shift(g, eps, b_grid)
    if not (np.isfinite(B) and tail_ok):
        raise PreconditionError(f"2g(x) - g(x+{eps}) has no finite witnessed maximum")
    gv = _evaluate(g, bxs)
    inf_g = float(np.min(gv[np.isfinite(gv)]))
    C = max(B, inf_g)
    C_alt = max(B, -inf_g)
    xs = _as_points(pair_grid if pair_grid is not None else GridSpec(0.0, 10.0, 128))
    sums = xs[:, None] + xs[None, :]
    pts = np.unique(np.concatenate([xs, sums.ravel()]))
    pc = conjugate_at(g, pts, lo=0.0, hi=y_hi)
    lookup = dict(zip(pts.tolist(), pc.values.tolist()))
    gs_x = np.array([lookup[v] for v in xs.tolist()])
    gs_sum = np.array([lookup[v] for v in sums.ravel().tolist()]).reshape(sums.shape)
    base = gs_sum - gs_x[:, None] - gs_x[None, :] - eps * sums
    scale = float(max(1.0, np.max(np.abs(gs_sum))))
    return DoublingForwardResult(
        epsilon=float(eps),
        B=B,
        inf_g=inf_g,
        C=C,
        C_alt=C_alt,
        worst_violation=float(np.max(base - C)),
        worst_violation_alt=float(np.max(base - C_alt)),
        scale=scale,
        b_tail_ok=tail_ok,
    )


@dataclass
class DoublingReverseResult:
    epsilon: float
    C: float
    B: float
    worst_violation: float
    scale: float
    excluded: int
    evaluated: int

    @property
    def ok(self) -> bool:
        return self.evaluated > 0 and self.worst_violation <= 1e-6 * self.scale

    def to_dict(self):
        return {
            "epsilon": self.epsilon,
            "C_eps": self.C,
            "B_eps_reconstructed": self.B,
            "worst_violation": self.worst_violation,
            "scale": self.scale,
            "excluded_columns": self.excluded,
            "evaluated_points": self.evaluated,
        }


def lemma2_reverse_check(gstar: GridFunction, eps: float, C: float, x_grid=None) -> DoublingReverseResult:
    """Rebuild ``g = (g*)*`` from a tabulated convex ``g*`` and test
    ``2 g(x) <= g(x + eps) + C``.

    Points whose reconstruction hits the last tabulated column are excluded.
    """
    if not gstar.is_convex():
        raise InvalidParameterError("gstar is not convex within tolerance")
    slopes = gstar.slopes()
    if x_grid is None:
        top = max(0.0, 0.9 * float(slopes[-1]) - eps)
        xs = np.linspace(0.0, top, 256) if top > 0 else np.array([0.0])
    else:
        xs = _as_points(x_grid)
    pts = np.unique(np.concatenate([xs, xs + eps]))
    g = young_conjugate(gstar, x_grid=pts, convex=True)
    good = dict(zip(pts.tolist(), (~g.at_upper).tolist()))
    val = dict(zip(pts.tolist(), g.values.tolist()))
    keep = np.array([good[a] and good[a + eps] for a in xs.tolist()], dtype=bool)
    excluded = int(np.count_nonzero(~keep))
    if not np.any(keep):
        return DoublingReverseResult(float(eps), float(C), np.nan, np.nan, 1.0, excluded, 0)
    gx = np.array([val[a] for a in xs[keep].tolist()])
    gxe = np.array([val[a + eps] for a in xs[keep].tolist()])
    B = float(np.max(2 * gx - gxe))
    scale = float(max(1.0, np.max(np.abs(gxe)), np.max(np.abs(gx))))
    return DoublingReverseResult(float(eps), float(C), B, B - C, scale, excluded, int(keep.sum()))


@dataclass
class SeriesResult:
    partial_sum: float
    log_sum: float
    terms_used: int
    log_terms: np.ndarray

    def to_dict(self):
        return {"partial_sum": self.partial_sum, "log_sum": self.log_sum, "terms_used": self.terms_used}


def corollary1_series(psistar, b: float, tol: float = 1e-12, j_max: int = 64) -> SeriesResult:
    """Sum ``exp(psi*(j)) / (b^j j!)`` in log space.

    Stops once three consecutive terms fall below ``tol`` times the running
    sum; raises :class:`DivergenceSuspected` if ``j_max`` is exhausted first.
    """
    if not b > 0:
        raise InvalidParameterError("b must be positive")
    js = np.arange(j_max + 1, dtype=float)
    ps = np.asarray(psistar(js), dtype=float)
    log_terms = ps - js * math.log(b) - gammaln(js + 1)
    log_sum = -np.inf
    small = 0
    log_tol = math.log(tol)
    for j, lt in enumerate(log_terms):
        log_sum = float(np.logaddexp(log_sum, lt))
        small = small + 1 if lt < log_tol + log_sum else 0
        if small == 3:
            return SeriesResult(math.exp(log_sum) if log_sum < 709 else math.inf, log_sum, j + 1, log_terms[: j + 1])
    raise DivergenceSuspected(
        f"series not settled within j_max={j_max} terms",
        partial=SeriesResult(math.exp(min(log_sum, 709.0)), log_sum, j_max + 1, log_terms),
    )


def lemma4_slope_check(g, delta: float, x_grid=None, factor: float = 10.0, gstar=None) -> GridFunction:
    """Sequence ``r(x) = (g*((1+delta) x) - g*(x)) / x`` with a growth verdict.

    The verdict passes when r is strictly increasing on the final quarter of
    the grid and ``r(end) > factor * r(start)``.
    """
    if delta < 0:
        raise InvalidParameterError("delta must be nonnegative")
    xs = _as_points(x_grid if x_grid is not None else GridSpec(1.0, 40.0, 256))
    if np.any(xs <= 0):
        raise InvalidParameterError("lemma4 grid must be positive")
    if gstar is None:
        both = conjugate_at(g, np.concatenate([xs, (1 + delta) * xs]), lo=0.0)
        vals = both.values
        upper = both.at_upper
        gs, gs_shift = vals[: xs.size], vals[xs.size:]
        truncated = int(np.count_nonzero(upper))
    else:
        gs, gs_shift = np.asarray(gstar(xs), float), np.asarray(gstar((1 + delta) * xs), float)
        truncated = 0
    r = (gs_shift - gs) / xs
    tail_inc = bool(np.all(np.diff(_tail(r)) > 0))
    ratio_ok = bool(r[-1] > factor * r[0])
    ratio = float(r[-1] / r[0]) if r[0] != 0 else (math.inf if r[-1] > 0 else math.nan)
    meta = {
        "source": "lemma4_slope_check",
        "delta": float(delta),
        "factor": float(factor),
        "tail_increasing": tail_inc,
        "end_start_ratio": ratio,
        "truncated_points": truncated,
        "verdict": "pass" if (tail_inc and ratio_ok) else "fail",
    }
    return GridFunction(xs, r, meta)


@dataclass
class LogIdentityResult:
    max_abs_err: float
    xs: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    term_log: np.ndarray
    term_conj: np.ndarray
    interior: np.ndarray
    head_ok: bool
    tail_ok: bool

    def to_dict(self):
        return {
            "max_abs_err": self.max_abs_err,
            "interior_points": int(np.count_nonzero(self.interior)),
            "head_ok": self.head_ok,
            "tail_ok": self.tail_ok,
        }


def growth_witnesses(u, threshold: float = 10.0, head=None, tail=None):
    """``u(x)/x`` rising past ``threshold`` on the tail and ``x/u(x)`` past it near 0."""
    hx = _as_points(head if head is not None else GridSpec(1e-4, 1e-1, 64, "log"))
    tx = _as_points(tail if tail is not None else GridSpec(1.0, 1e3, 64, "log"))
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        head_ratio = hx / _evaluate(u, hx)
        tail_ratio = _evaluate(u, tx) / tx
        head_ok = bool(np.all(np.diff(head_ratio) <= 0) and head_ratio[0] > threshold)
        tr = _tail(tail_ratio)
        tail_ok = bool(np.all(np.diff(tr) >= 0) and tail_ratio[-1] > threshold)
    return head_ok, tail_ok


def eq21_identity_check(u, x_grid=None, y_grid=None, s_grid=None, threshold: float = 10.0) -> LogIdentityResult:
    """Change-of-variables identity ``(u[e])*(x) + (u*[e])*(x) = x ln x - x``.

    ``u[e](y) = u(e^y)`` and both outer conjugates are taken over the whole
    line in the log variable.  Every conjugate is a discrete max over samples
    (the inner ``u*`` on ``s_grid``, the outer ones on ``y_grid``).
    """
    head_ok, tail_ok = growth_witnesses(u, threshold)
    if not (head_ok and tail_ok):
        raise PreconditionError(f"u fails growth witnesses (head_ok={head_ok}, tail_ok={tail_ok})")
    xs = _as_points(x_grid if x_grid is not None else GridSpec(0.5, 10.0, 256))
    ys = _as_points(y_grid if y_grid is not None else GridSpec(-6.0, 4.0, 4096))
    ts = np.exp(ys)
    if s_grid is None:
        s_grid = GridSpec(1e-6, auto_upper(u, float(ts[-1])), 4096)
    ss = _as_points(s_grid)
    u_log = _evaluate(u, ts)
    term_log, i1 = discrete_conjugate(ys, u_log, xs, method="hull")
    v_t, _ = discrete_conjugate(ss, _evaluate(u, ss), ts, method="hull")
    term_conj, i2 = discrete_conjugate(ys, v_t, xs, method="hull")
    lhs = term_log + term_conj
    rhs = xlogy(xs, xs) - xs
    interior = (i1 > 0) & (i1 < ys.size - 1) & (i2 > 0) & (i2 < ys.size - 1)
    err = np.abs(lhs - rhs)
    max_err = float(np.max(err[interior])) if np.any(interior) else math.nan
    return LogIdentityResult(max_err, xs, lhs, rhs, term_log, term_conj, interior, head_ok, tail_ok)
