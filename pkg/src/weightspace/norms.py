"""Weighted norms of entire functions and the verifiers built on them.

Every norm is a supremum over an unbounded set.  Norms on the complex plane
grow their window by doubling until the running supremum is stable; norms on
the real line are taken over the sample grid of a :class:`DerivativeTable`
and report whether the maximiser sat on the grid edge.  All arithmetic on the
defining ratios happens in log space.
"""
from __future__ import annotations

import io
import math
import threading
from dataclasses import asdict, dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln

from .conjugate import conjugate_at, golden_max, fmt_float, _jsonable
from .entire import (
    DerivativeTable,
    EntireFunction,
    derivative_table,
    growth_profile,
    log_abs,
    taylor_extend,
)
from .errors import InsufficientDataError, InvalidParameterError
from .grids import GridSpec, symmetric
from .weights import WeightFunction, compose_exp, regularize_at_zero

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
STABILITY = 0.05


class PsiStar:
    """Cached ``psi*(k) = sup_{y > 0} (k y - w(e^y))`` at real arguments.

    ``psi*(0) = -w(1)`` exactly (``psi`` is nondecreasing, so its infimum over
    ``y >= 0`` sits at 0).  Other values are fresh 1-D maximisations.
    """

    def __init__(self, weight: WeightFunction):
        self.weight = weight
        self.psi = compose_exp(weight)
        self._cache = {}
        self._lock = threading.Lock()

    def __call__(self, k):
        k = np.atleast_1d(np.asarray(k, dtype=float))
        with self._lock:
            return self._lookup(k)

    def _lookup(self, k):
        missing = sorted({float(v) for v in k.ravel()} - self._cache.keys())
        if missing:
            arr = np.array(missing)
            vals = conjugate_at(self.psi, arr, lo=0.0).values
            for a, v in zip(missing, vals):
                self._cache[a] = float(v)
            if 0.0 in self._cache:
                self._cache[0.0] = -float(self.weight(np.array([1.0]))[0])
        return np.array([self._cache[float(v)] for v in k.ravel()]).reshape(k.shape)


@dataclass
class SpaceParams:
    sigma: float = 1.0
    epsilons: Sequence[float] = (0.5, 1.0)
    k_max: int = 400
    m_max: int = 2
    n_max: int = 12

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidParameterError("sigma must be positive")
        eps = [float(e) for e in self.epsilons]
        if not eps or any(e <= 0 for e in eps):
            raise InvalidParameterError("epsilons must be positive")
        self.epsilons = tuple(sorted(eps))

    def to_dict(self):
        return {"sigma": self.sigma, "epsilons": list(self.epsilons), "k_max": self.k_max,
                "m_max": self.m_max, "n_max": self.n_max}


@dataclass
class NormValue:
    """A supremum with its provenance.

    ``log_value`` is the natural log of the sup (``-inf`` for zero).
    ``divergent`` marks a sup that never stabilised; ``inconclusive`` a
    truncation that could not be closed.
    """

    log_value: float
    window: tuple = ()
    argmax: tuple = ()
    boundary: bool = False
    divergent: bool = False
    inconclusive: bool = False
    k_cut: Optional[int] = None
    capped: bool = False

    @property
    def value(self) -> float:
        if self.divergent:
            return math.inf
        return math.exp(self.log_value) if self.log_value < 709.0 else math.inf

    def to_dict(self):
        return _jsonable({
            "value": self.value,
            "log_value": self.log_value,
            "window": list(self.window),
            "argmax": list(self.argmax),
            "boundary": self.boundary,
            "divergent": self.divergent,
            "inconclusive": self.inconclusive,
            "k_cut": self.k_cut,
            "capped": self.capped,
        })


@dataclass
class VerificationReport:
    """Verdict of one check with its fitted constants and diagnostics.

    ``rows`` is the flat table written as CSV; ``series`` holds named
    ``(x, y)`` curves for plotting.
    """

    theorem: str
    fitted_constants: dict
    worst_margin: float
    sampled_params: dict
    verdict: str
    diagnostics: dict = field(default_factory=dict)
    rows: list = field(default_factory=list)
    series: dict = field(default_factory=dict)

    def to_dict(self):
        return _jsonable({
            "check": self.theorem,
            "verdict": self.verdict,
            "worst_margin": self.worst_margin,
            "fitted_constants": self.fitted_constants,
            "sampled_params": self.sampled_params,
            "diagnostics": self.diagnostics,
        })

    def to_csv(self) -> str:
        if not self.rows:
            return "key,value\n" + "".join(
                f"{k},{_cell(v)}\n" for k, v in sorted(self.fitted_constants.items()))
        cols = list(self.rows[0].keys())
        for r in self.rows[1:]:
            cols += [c for c in r if c not in cols]
        buf = io.StringIO()
        buf.write(",".join(cols) + "\n")
        for r in self.rows:
            buf.write(",".join(_cell(r.get(c, "")) for c in cols) + "\n")
        return buf.getvalue()


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return fmt_float(v)
    return str(v)


def verdict_of(results: Sequence[str]) -> str:
    """Worst verdict: any fail beats inconclusive beats pass."""
    if FAIL in results:
        return FAIL
    if INCONCLUSIVE in results:
        return INCONCLUSIVE
    return PASS


# --------------------------------------------------------------------------
# sup-norm on the plane


def _p_log_ratio(f, w, sigma, eps, k, x, y):
    z = x + 1j * y
    with np.errstate(over="ignore"):
        wv = np.asarray(w((sigma + eps) * np.abs(y)), dtype=float)
    return log_abs(f, z) + k * np.log1p(np.abs(z)) - wv, bool(np.any(np.isinf(wv)))


def p_norm(f: EntireFunction, w: WeightFunction, sigma: float, eps: float, k: int,
           start=(2.0, 1.0), shape=(401, 201), max_doublings: int = 10, rtol: float = 1e-6) -> NormValue:
    """``sup_z |f(z)| (1+|z|)^k / exp(w((sigma+eps)|Im z|))``.

    The rectangle ``|x| <= X, |y| <= Y`` doubles until two consecutive
    doublings change the running sup by at most ``rtol`` (relative).  After
    ``max_doublings`` without that the value is reported divergent.
    """
    X, Y = start
    best = -math.inf
    arg = (0.0, 0.0)
    stable = 0
    capped = False
    for step in range(max_doublings + 1):
        xs = np.linspace(-X, X, shape[0])
        ys = np.linspace(-Y, Y, shape[1])
        vals, cap = _p_log_ratio(f, w, sigma, eps, k, xs[None, :], ys[:, None])
        capped |= cap
        vals = np.where(np.isnan(vals), -np.inf, vals)
        i = np.unravel_index(np.argmax(vals), vals.shape)
        cand = float(vals[i])
        cand_arg = (float(xs[i[1]]), float(ys[i[0]]))
        if math.isfinite(cand):
            def neg(p):
                v, _ = _p_log_ratio(f, w, sigma, eps, k, np.array(p[0]), np.array(p[1]))
                v = float(v)
                return -v if math.isfinite(v) else math.inf

            res = minimize(neg, np.array(cand_arg), method="Nelder-Mead",
                           options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 400})
            if res.success or math.isfinite(res.fun):
                px, py = res.x
                if abs(px) <= X and abs(py) <= Y and -res.fun > cand:
                    cand, cand_arg = float(-res.fun), (float(px), float(py))
        prev = best
        if cand > best:
            best, arg = cand, cand_arg
        if step > 0:
            if prev == best == -math.inf:
                change = 0.0
            elif prev == -math.inf:
                change = math.inf
            else:
                change = abs(math.expm1(best - prev))
            stable = stable + 1 if change <= rtol else 0
            if stable >= 2:
                return NormValue(best, (X, Y), arg, False, False, False, None, capped)
        X, Y = 2 * X, 2 * Y
    return NormValue(best, (X / 2, Y / 2), arg, False, True, False, None, capped)


# --------------------------------------------------------------------------
# sup-norms on the real line from derivative data


def _line_norm(table: DerivativeTable, psistar, sigma, eps, m, shifted: bool, k_max=400, tol=1e-12) -> NormValue:
    if m > table.n_max:
        raise InvalidParameterError(f"table covers n <= {table.n_max}, need m = {m}")
    la = table.log_abs()[:, : m + 1]
    best_n = np.argmax(la, axis=1)
    lf = la[np.arange(table.xs.size), best_n]
    with np.errstate(divide="ignore"):
        lx = np.log1p(np.abs(table.xs)) if shifted else np.log(np.abs(table.xs))
    log_b = math.log(sigma + eps)
    ks = np.arange(k_max + 1)
    ps = psistar(ks)
    running = -math.inf
    arg = (math.nan, -1, -1)
    small = 0
    log_tol = math.log(tol)
    prev_term = math.inf
    for k in ks:
        with np.errstate(invalid="ignore"):
            row = (k * lx if k else np.zeros_like(lx)) + lf
        row = np.where(np.isnan(row), -np.inf, row)
        i = int(np.argmax(row))
        term = float(row[i]) - float(gammaln(k + 1)) - k * log_b + float(ps[k])
        if term > running:
            running = term
            arg = (float(table.xs[i]), int(best_n[i]), int(k))
        if running == -math.inf:
            small += 1
        elif term < running + log_tol and term <= prev_term:
            small += 1
        else:
            small = 0
        prev_term = term
        if small == 3:
            boundary = arg[0] in (float(table.xs[0]), float(table.xs[-1]))
            return NormValue(running, (float(table.xs[0]), float(table.xs[-1])), arg, boundary,
                             False, False, int(k))
    boundary = arg[0] in (float(table.xs[0]), float(table.xs[-1]))
    return NormValue(running, (float(table.xs[0]), float(table.xs[-1])), arg, boundary, False, True, int(k_max))


def g_norm(table: DerivativeTable, psistar, sigma: float, eps: float, m: int, k_max: int = 400,
           tol: float = 1e-12) -> NormValue:
    """``max_{n <= m} sup_{x, k} |x^k f^{(n)}(x)| / (k! (sigma+eps)^k e^{-psi*(k)})``.

    ``k`` runs until three consecutive terms are decreasing and below ``tol``
    times the running sup; ``inconclusive`` is set if ``k_max`` comes first.
    """
    return _line_norm(table, psistar, sigma, eps, m, False, k_max, tol)


def s_norm(table: DerivativeTable, psistar, sigma: float, eps: float, m: int, k_max: int = 400,
           tol: float = 1e-12) -> NormValue:
    """As :func:`g_norm` with ``(1+|x|)^k`` in place of ``|x|^k``."""
    return _line_norm(table, psistar, sigma, eps, m, True, k_max, tol)


@dataclass
class NormReport:
    p_values: dict
    g_values: dict
    s_values: dict
    domain: dict

    def to_dict(self):
        return _jsonable({
            "p_values": {k: v.to_dict() for k, v in self.p_values.items()},
            "g_values": {k: v.to_dict() for k, v in self.g_values.items()},
            "s_values": {k: v.to_dict() for k, v in self.s_values.items()},
            "domain": self.domain,
        })

    def rows(self):
        out = []
        for kind, table in (("p", self.p_values), ("g", self.g_values), ("s", self.s_values)):
            for key, nv in table.items():
                eps, idx = key.split(",")
                out.append({"norm": kind, "epsilon": float(eps), "index": int(idx), "value": nv.value,
                            "log_value": nv.log_value, "k_cut": "" if nv.k_cut is None else nv.k_cut,
                            "boundary": nv.boundary, "divergent": nv.divergent,
                            "inconclusive": nv.inconclusive})
        return out


def _key(eps, idx):
    return f"{eps:g},{idx}"


def norm_report(f: EntireFunction, w: WeightFunction, params: SpaceParams, table: DerivativeTable,
                psistar: Optional[PsiStar] = None) -> NormReport:
    psistar = psistar or PsiStar(w)
    p, g, s = {}, {}, {}
    for eps in params.epsilons:
        for m in range(params.m_max + 1):
            p[_key(eps, m)] = p_norm(f, w, params.sigma, eps, m)
            g[_key(eps, m)] = g_norm(table, psistar, params.sigma, eps, m, params.k_max)
            s[_key(eps, m)] = s_norm(table, psistar, params.sigma, eps, m, params.k_max)
    return NormReport(p, g, s, {"x_grid": [float(table.xs[0]), float(table.xs[-1]), int(table.xs.size)]})


# --------------------------------------------------------------------------
# verifiers


def lemma3_constants(psistar, sigma: float, eps: float, k_max: int = 400, tol: float = 1e-12):
    """``delta``, ``C(eps)`` and ``C1(eps) = max(1, C e^{-psi*(0)})``.

    ``C(eps) = sup_k (1 + 1/delta)^k e^{psi*(k)} / (k! (sigma+eps)^k)`` with
    ``delta = eps / (2 sigma + eps)``; the series terms tend to 0, so the sup
    is reached once three consecutive terms are negligible.
    """
    delta = eps / (2.0 * sigma + eps)
    ks = np.arange(k_max + 1)
    logs = ks * math.log1p(1.0 / delta) + psistar(ks) - gammaln(ks + 1) - ks * math.log(sigma + eps)
    running = -math.inf
    small = 0
    for k, t in enumerate(logs):
        running = max(running, float(t))
        small = small + 1 if (t < running + math.log(tol) and k > 0 and t <= logs[k - 1]) else 0
        if small == 3:
            break
    C = max(1.0, math.exp(running))
    C1 = max(1.0, C * math.exp(-float(psistar(np.array([0.0]))[0])))
    return delta, C, C1


def lemma3_check(table: DerivativeTable, psistar, params: SpaceParams) -> VerificationReport:
    """``g <= s`` at the same parameters and ``s_{eps,m} <= C1(eps) g_{eps/2,m}``."""
    rows, results = [], []
    worst = math.inf
    fitted = {}
    for eps in params.epsilons:
        delta, C, C1 = lemma3_constants(psistar, params.sigma, eps, params.k_max)
        fitted[f"C1(eps={eps:g})"] = C1
        fitted[f"C(eps={eps:g})"] = C
        for m in range(params.m_max + 1):
            g = g_norm(table, psistar, params.sigma, eps, m, params.k_max)
            s = s_norm(table, psistar, params.sigma, eps, m, params.k_max)
            gh = g_norm(table, psistar, params.sigma, eps / 2, m, params.k_max)
            incon = g.inconclusive or s.inconclusive or gh.inconclusive
            # margins as relative slack; both zero counts as equality
            m5 = 0.0 if s.value == g.value else (s.value - g.value) / max(s.value, 1e-300)
            rhs9 = C1 * gh.value
            m9 = 0.0 if rhs9 == s.value else (rhs9 - s.value) / max(rhs9, 1e-300)
            ok5 = s.log_value >= g.log_value
            ok9 = s.value <= rhs9 * (1 + 1e-12)
            results.append(INCONCLUSIVE if incon else (PASS if ok5 and ok9 else FAIL))
            worst = min(worst, m5, m9)
            rows.append({"epsilon": eps, "m": m, "g_norm": g.value, "s_norm": s.value, "g_norm_half_eps": gh.value,
                         "delta": delta, "C1": C1, "margin_5": m5, "margin_9": m9, "inconclusive": incon})
    return VerificationReport(
        "lemma3", fitted, worst, params.to_dict(), verdict_of(results),
        {"x_grid": [float(table.xs[0]), float(table.xs[-1]), int(table.xs.size)]}, rows,
        {"s_norm": ([r["m"] + r["epsilon"] for r in rows], [r["s_norm"] for r in rows]),
         "g_norm": ([r["m"] + r["epsilon"] for r in rows], [r["g_norm"] for r in rows])},
    )


def derivative_bound_constant(table: DerivativeTable, psistar, sigma, eps, m, n_max) -> NormValue:
    """``max_{x, n <= n_max} |x^m f^{(n)}(x)| / (n! (sigma+eps)^n e^{-psi*(n)})``."""
    n = np.arange(n_max + 1)
    la = table.log_abs()[:, : n_max + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        lx = m * np.log(np.abs(table.xs)) if m else np.zeros(table.xs.size)
    logs = lx[:, None] + la - gammaln(n + 1)[None, :] - n[None, :] * math.log(sigma + eps) + psistar(n)[None, :]
    logs = np.where(np.isnan(logs), -np.inf, logs)
    i, j = np.unravel_index(np.argmax(logs), logs.shape)
    val = float(logs[i, j])
    boundary = i in (0, table.xs.size - 1) and math.isfinite(val)
    return NormValue(val, (float(table.xs[0]), float(table.xs[-1])), (float(table.xs[i]), int(j)), boundary)


def theorem1_check(f: EntireFunction, w: WeightFunction, params: SpaceParams, x_grid: Optional[GridSpec] = None,
                   psistar: Optional[PsiStar] = None) -> VerificationReport:
    """Fit ``c_{eps,m}`` in ``|x^m f^{(n)}(x)| <= c n! (sigma+eps)^n e^{-psi*(n)}``.

    Passes when every fitted constant is finite and moves by less than 5% when
    the x-grid is doubled and ``n_max`` grows by 4.  The ratio
    ``d = c / p_{eps/2,m}(f)`` is reported; a divergent ``p`` means f is not in
    the space and the check fails.
    """
    psistar = psistar or PsiStar(w)
    grid = x_grid or symmetric(8.0, 321)
    big = grid.doubled()
    n1, n2 = params.n_max, params.n_max + 4
    t1 = derivative_table(f, grid, n1)
    t2 = derivative_table(f, big, n2)
    rows, results = [], []
    fitted = {}
    worst = math.inf
    for eps in params.epsilons:
        for m in range(params.m_max + 1):
            c1 = derivative_bound_constant(t1, psistar, params.sigma, eps, m, n1)
            c2 = derivative_bound_constant(t2, psistar, params.sigma, eps, m, n2)
            p = p_norm(f, w, params.sigma, eps / 2, m)
            if c1.log_value == -math.inf and c2.log_value == -math.inf:
                change = 0.0
            elif math.isfinite(c1.log_value) and math.isfinite(c2.log_value):
                change = abs(math.expm1(c2.log_value - c1.log_value))
            else:
                change = math.inf
            finite = math.isfinite(c2.value) or c2.log_value == -math.inf
            stable = change < STABILITY
            if p.divergent:
                status = FAIL
            elif finite and stable:
                status = PASS
            else:
                status = FAIL
            results.append(status)
            d = c2.value / p.value if p.value > 0 and not p.divergent else (0.0 if c2.value == 0 else math.inf)
            fitted[f"c(eps={eps:g},m={m})"] = c2.value
            fitted[f"d(eps={eps:g},m={m})"] = d
            worst = min(worst, STABILITY - change)
            rows.append({"epsilon": eps, "m": m, "c_base": c1.value, "c_enlarged": c2.value, "relative_change": change,
                         "p_half_eps": p.value, "p_divergent": p.divergent, "d": d,
                         "argmax_x": c2.argmax[0], "argmax_n": c2.argmax[1], "boundary": c2.boundary,
                         "verdict": status})
    return VerificationReport(
        "theorem1", fitted, worst, params.to_dict(), verdict_of(results),
        {"base_grid": grid.to_dict(), "enlarged_grid": big.to_dict(), "n_max": [n1, n2], "function": f.name},
        rows,
        {"c_base": (list(range(len(rows))), [r["c_base"] for r in rows]),
         "c_enlarged": (list(range(len(rows))), [r["c_enlarged"] for r in rows])},
    )


def _growth_constant(F: EntireFunction, w: WeightFunction, sigma, eps, m, y_max, radius, count=161, width=201):
    """``gamma = sup_y profile(y) / ((1+|y|)^m e^{w((sigma+eps)(1+|y|))})`` with x inside the valid disc.

    Row y scans ``|x| <= sqrt(radius^2 - y^2)``; the best cell of each row is
    refined by a golden-section search run on all rows at once.
    """
    ys = np.linspace(0.0, y_max, count)
    half = np.sqrt(np.maximum(radius ** 2 - ys ** 2, 0.0))
    ys, half = ys[half > 0], half[half > 0]
    if ys.size == 0:
        return -math.inf, 0

    def logval(x, y):
        z = x + 1j * y
        return m * np.log1p(np.abs(z)) + log_abs(F, z)

    t = np.linspace(-1.0, 1.0, width)
    xs = half[:, None] * t[None, :]
    grid = logval(xs, ys[:, None])
    idx = np.argmax(grid, axis=1)
    rows = np.arange(ys.size)
    best = grid[rows, idx]
    left = xs[rows, np.maximum(idx - 1, 0)]
    right = xs[rows, np.minimum(idx + 1, width - 1)]
    _, refined = golden_max(lambda x, lanes: logval(x, ys[lanes]), left, right)
    best = np.maximum(best, np.where(np.isnan(refined), -np.inf, refined))
    bound_flags = int(np.count_nonzero(((idx == 0) | (idx == width - 1)) & np.isfinite(best)))
    with np.errstate(over="ignore"):
        wv = np.asarray(w((sigma + eps) * (1 + ys)), dtype=float)
    logs = best - m * np.log1p(ys) - wv
    return float(np.max(logs)), bound_flags


def theorem2_check(table: DerivativeTable, w: WeightFunction, params: SpaceParams,
                   reference: Optional[EntireFunction] = None, m_list=(0, 1, 2, 3, 4),
                   y_windows=(1.0, 2.0), probe_radius: float = 2.0) -> VerificationReport:
    """Taylor-extend the table row at 0 and fit the growth constant.

    The extension must reproduce the table on the real line (1e-8 relative)
    and, when a reference is given, match it on ``|z| <= probe_radius``
    (1e-8 absolute).  ``gamma`` is the sup of the growth profile over the
    bounding envelope; it must be stable (< 5%) when the y-window doubles.
    The x-window stays inside the disc where the truncation is certified.
    """
    try:
        ext = taylor_extend(table, probe_radius=probe_radius)
    except InsufficientDataError as exc:
        return VerificationReport("theorem2", {}, -math.inf, params.to_dict(), INCONCLUSIVE, {"error": str(exc)})
    F = ext.as_entire("extension")
    vals = ext(table.xs.astype(complex))
    ref = table.values[:, 0]
    line_err = float(np.max(np.abs(vals - ref) / np.maximum(1.0, np.abs(ref))))
    results = [PASS if line_err <= 1e-8 else FAIL]
    diag = {"degree": ext.degree, "tail_bound": ext.tail_bound, "valid_radius": ext.valid_radius,
            "line_max_rel_err": line_err, "coverage": "sampled",
            "sampled": {"epsilon": list(params.epsilons), "m": list(m_list)}}
    if reference is not None:
        r = np.linspace(0.0, probe_radius, 21)
        th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
        z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
        disc_err = float(np.max(np.abs(ext(z) - reference(z))))
        diag["disc_max_abs_err"] = disc_err
        results.append(PASS if disc_err <= 1e-8 else FAIL)
    radius = ext.valid_radius if math.isfinite(ext.valid_radius) else 10.0
    rows, fitted = [], {}
    worst = math.inf
    zero = not np.any(ext.coefficients)
    for eps in params.epsilons:
        for m in m_list:
            gammas = []
            for Y in y_windows:
                g, flags = _growth_constant(F, w, params.sigma, eps, m, min(Y, radius * 0.99), radius)
                gammas.append(g)
            if zero:
                change = 0.0
            else:
                change = abs(math.expm1(gammas[-1] - gammas[0])) if all(map(math.isfinite, gammas)) else math.inf
            status = PASS if change < STABILITY else FAIL
            results.append(status)
            worst = min(worst, STABILITY - change)
            gam = 0.0 if zero else math.exp(gammas[-1])
            fitted[f"gamma(eps={eps:g},m={m})"] = gam
            rows.append({"epsilon": eps, "m": m, "gamma_small_window": 0.0 if zero else math.exp(gammas[0]),
                         "gamma": gam, "relative_change": change, "verdict": status})
    return VerificationReport("theorem2", fitted, worst, params.to_dict(), verdict_of(results), diag, rows)


def phi_conjugate(w: WeightFunction) -> Callable:
    """``w*`` from the closed form when available, else by 1-D maximisation."""
    if w.exact_conjugate is not None:
        return lambda t: np.asarray(w.exact_conjugate(np.asarray(t, dtype=float)), dtype=float)
    return lambda t: conjugate_at(w, np.asarray(t, dtype=float), lo=0.0).values


def theorem4_seminorm(table: DerivativeTable, phistar: Callable, sigma: float, eps: float, n: int) -> NormValue:
    """``sup_x |f^{(n)}(x)| e^{w*(|x|/(sigma+eps))}`` over the table grid."""
    la = table.log_abs()[:, n]
    ps = np.asarray(phistar(np.abs(table.xs) / (sigma + eps)), dtype=float)
    good = np.isfinite(ps)
    logs = np.where(good, la + ps, -np.inf)
    i = int(np.argmax(logs))
    val = float(logs[i])
    boundary = i in (0, table.xs.size - 1) and math.isfinite(val)
    nv = NormValue(val, (float(table.xs[0]), float(table.xs[-1])), (float(table.xs[i]),), boundary)
    nv.capped = bool(np.any(~good))
    return nv


def _direction_a(table, psistar, phistar, sigma, eps, n, s_reg, k_max):
    """``mu = sup_x |f^{(n)}(x)| e^{w*(|x|/(sigma+3 eps))} / (s_{eps,n}(f) e^{s})``."""
    sn = s_norm(table, psistar, sigma, eps, n, k_max)
    la = table.log_abs()[:, n]
    ps = np.asarray(phistar(np.abs(table.xs) / (sigma + 3 * eps)), dtype=float)
    top = float(np.max(np.where(np.isfinite(ps), la + ps, -np.inf)))
    if sn.log_value == -math.inf:
        return -math.inf, sn
    return top - sn.log_value - s_reg, sn


def theorem4_equivalence_check(f: EntireFunction, w: WeightFunction, params: SpaceParams,
                               x_grid: Optional[GridSpec] = None, n_list=(0, 1, 2, 3, 4), d: float = 2.0,
                               k_cut: int = 60, psistar: Optional[PsiStar] = None) -> VerificationReport:
    """Both directions of the derivative-decay description.

    Direction A fits ``mu`` in
    ``|f^{(n)}(x)| <= s_{eps,n}(f) mu e^{s} e^{-w*(|x|/(sigma+3 eps))}`` and
    requires it finite and stable (< 5%) under grid doubling.  Direction B
    checks ``|x^k f^{(n)}(x)| <= R e^{s} e^{s1} (sigma+eps)^k k! e^{-psi*(k)}``
    for ``k <= k_cut`` with ``R`` the seminorm built from ``w*``; ``s`` and
    ``s1`` are the conjugate gaps of the regularised weight.
    """
    if not w.convex_on_halfline:
        raise InvalidParameterError("theorem4 requires a weight claimed convex on [0, inf)")
    psistar = psistar or PsiStar(w)
    reg = regularize_at_zero(w, d)
    phistar = phi_conjugate(w)
    phi1star = phi_conjugate(reg.weight)
    grid = x_grid or symmetric(12.0, 481)
    n_top = max(n_list)
    t1 = derivative_table(f, grid, n_top)
    t2 = derivative_table(f, grid.doubled(), n_top)
    ks = np.arange(k_cut + 1)
    ps_k = psistar(ks)
    rows, results, fitted = [], [], {"s": reg.s, "s1": reg.s1, "d": reg.d, "patch_exponent": reg.exponent}
    worst = math.inf
    for eps in params.epsilons:
        for n in n_list:
            mu1, _ = _direction_a(t1, psistar, phistar, params.sigma, eps, n, reg.s, params.k_max)
            mu2, sn = _direction_a(t2, psistar, phistar, params.sigma, eps, n, reg.s, params.k_max)
            if mu1 == mu2 == -math.inf:
                change_a = 0.0
            elif math.isfinite(mu1) and math.isfinite(mu2):
                change_a = abs(math.expm1(mu2 - mu1))
            else:
                change_a = math.inf
            status_a = INCONCLUSIVE if sn.inconclusive else (PASS if change_a < STABILITY else FAIL)

            R = theorem4_seminorm(t2, phistar, params.sigma, eps, n)
            R1 = theorem4_seminorm(t2, phi1star, params.sigma, eps, n)
            la = t2.log_abs()[:, n]
            with np.errstate(divide="ignore", invalid="ignore"):
                lx = np.log(np.abs(t2.xs))
                lhs = np.max(np.where(ks[:, None] == 0, la[None, :], ks[:, None] * lx[None, :] + la[None, :]),
                             axis=1)
            rhs = R.log_value + reg.s + reg.s1 + ks * math.log(params.sigma + eps) + gammaln(ks + 1) - ps_k
            if R.log_value == -math.inf:
                margin_b = 0.0 if np.all(lhs == -math.inf) else -math.inf
            else:
                margin_b = float(np.min(rhs - lhs))
            status_b = PASS if margin_b >= -1e-9 else FAIL
            results += [status_a, status_b]
            worst = min(worst, margin_b, STABILITY - change_a)
            fitted[f"mu(eps={eps:g},n={n})"] = math.exp(mu2) if mu2 < 709 else math.inf
            fitted[f"R(eps={eps:g},n={n})"] = R.value
            rows.append({"epsilon": eps, "n": n, "mu_base": math.exp(mu1) if mu1 < 709 else math.inf,
                         "mu_enlarged": math.exp(mu2) if mu2 < 709 else math.inf, "mu_change": change_a,
                         "R": R.value, "R_regularized": R1.value, "R_boundary": R.boundary,
                         "margin_B_log": margin_b, "verdict_A": status_a, "verdict_B": status_b})
    return VerificationReport(
        "theorem4", fitted, worst, params.to_dict(), verdict_of(results),
        {"x_grid": grid.to_dict(), "k_cut": k_cut, "regularization": reg.to_dict()}, rows,
    )
