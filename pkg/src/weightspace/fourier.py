"""Fourier transform by trapezoid quadrature and the checks built on it.

``F f(x) = int f(xi) e^{-i x xi} dxi`` and its derivatives
``int f(xi) (-i xi)^n e^{-i x xi} dxi`` are computed with the uniform
trapezoid rule on a symmetric window.  For smooth integrands that decay
faster than any exponential the rule is spectrally accurate, so the only
error to watch is the mass outside the window; it is checked from the edge
samples.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .conjugate import fmt_float
from .entire import DerivativeTable, EntireFunction, cauchy_derivative, evaluate, taylor_extend
from .errors import InsufficientDataError, InvalidParameterError, WindowTooSmallError
from .grids import GridSpec, symmetric
from .norms import FAIL, INCONCLUSIVE, PASS, PsiStar, SpaceParams, VerificationReport, g_norm, p_norm, verdict_of

TAIL_RTOL = 1e-12


@dataclass(frozen=True)
class QuadratureSpec:
    """Trapezoid rule with ``nodes`` intervals on ``[-window, window]``."""

    window: float = 16.0
    nodes: int = 1024

    def __post_init__(self):
        if not self.window > 0:
            raise InvalidParameterError("quadrature window must be positive")
        if self.nodes < 64 or self.nodes % 2:
            raise InvalidParameterError("quadrature nodes must be even and >= 64")

    def points(self) -> np.ndarray:
        return np.linspace(-self.window, self.window, self.nodes + 1)

    def weights(self) -> np.ndarray:
        h = 2.0 * self.window / self.nodes
        w = np.full(self.nodes + 1, h)
        w[0] = w[-1] = h / 2
        return w


@dataclass
class TransformResult:
    x_grid: np.ndarray
    values: np.ndarray
    derivative_values: dict = field(default_factory=dict)
    tail_bound: float = 0.0

    def __post_init__(self):
        if self.tail_bound < 0:
            raise InvalidParameterError("tail_bound must be nonnegative")
        for n, v in self.derivative_values.items():
            if np.shape(v) != np.shape(self.x_grid):
                raise InvalidParameterError(f"derivative {n} has inconsistent length")

    def to_csv(self) -> str:
        buf = io.StringIO()
        if self.derivative_values:
            buf.write("x,re,im,n\n")
            for n in sorted(self.derivative_values):
                for x, v in zip(self.x_grid, self.derivative_values[n]):
                    buf.write(f"{fmt_float(x)},{fmt_float(v.real)},{fmt_float(v.imag)},{n}\n")
        else:
            buf.write("x,re,im\n")
            for x, v in zip(self.x_grid, self.values):
                buf.write(f"{fmt_float(x)},{fmt_float(v.real)},{fmt_float(v.imag)}\n")
        return buf.getvalue()


def _samples(f, nodes):
    if isinstance(f, EntireFunction):
        return np.asarray(evaluate(f, nodes.astype(complex)), dtype=complex)
    if callable(f):
        return np.asarray(f(nodes), dtype=complex)
    arr = np.asarray(f, dtype=complex)
    if arr.shape != nodes.shape:
        raise InvalidParameterError(f"sampled input needs {nodes.size} values on the quadrature nodes")
    return arr


def _check_tail(vals, nodes, n_list):
    peak = float(np.max(np.abs(vals)))
    if peak == 0.0:
        return 0.0
    tail = 0.0
    for n in n_list:
        weighted = np.abs(vals) * np.abs(nodes) ** n
        p = float(np.max(weighted))
        edge = max(float(weighted[0]), float(weighted[-1]))
        if edge > TAIL_RTOL * p:
            raise WindowTooSmallError(
                f"integrand at the window edge is {edge / p:.3g} of its peak (n={n}); widen the window")
        tail = max(tail, edge * abs(nodes[-1]))
    return tail


def _integrate(vals, nodes, weights, x, n, sign, chunk=256):
    factor = (sign * 1j * nodes) ** n if n else 1.0
    integrand = weights * vals * factor
    out = np.empty(x.size, dtype=complex)
    for s in range(0, x.size, chunk):
        xb = x[s:s + chunk]
        out[s:s + chunk] = np.exp(sign * 1j * xb[:, None] * nodes[None, :]) @ integrand
    return out


def fourier_transform(f, x_grid, q: QuadratureSpec = QuadratureSpec(), n_list: Sequence[int] = (0,)) -> TransformResult:
    """``int f(xi) (-i xi)^n e^{-i x xi} dxi`` for every x and n in ``n_list``.

    Raises :class:`WindowTooSmallError` if the weighted integrand at the
    window edge exceeds ``1e-12`` of its peak.
    """
    xs = x_grid.points() if isinstance(x_grid, GridSpec) else np.atleast_1d(np.asarray(x_grid, dtype=float))
    nodes, weights = q.points(), q.weights()
    vals = _samples(f, nodes)
    n_list = sorted(set(int(n) for n in n_list) | {0})
    tail = _check_tail(vals, nodes, n_list)
    derivs = {n: _integrate(vals, nodes, weights, xs, n, -1.0) for n in n_list}
    return TransformResult(xs, derivs[0], derivs, tail)


def inverse_transform(g, xi_grid, q: QuadratureSpec = QuadratureSpec(), n_list: Sequence[int] = (0,)) -> TransformResult:
    """``(1/2 pi) int g(x) (i x)^n e^{i x xi} dx``.

    ``g`` is a callable or an array of samples on the quadrature nodes.
    """
    xs = xi_grid.points() if isinstance(xi_grid, GridSpec) else np.atleast_1d(np.asarray(xi_grid, dtype=float))
    nodes, weights = q.points(), q.weights()
    vals = _samples(g, nodes)
    n_list = sorted(set(int(n) for n in n_list) | {0})
    tail = _check_tail(vals, nodes, n_list)
    derivs = {n: _integrate(vals, nodes, weights, xs, n, 1.0) / (2.0 * math.pi) for n in n_list}
    return TransformResult(xs, derivs[0], derivs, tail / (2.0 * math.pi))


def transform_as_entire(f, q: QuadratureSpec = QuadratureSpec(), name: str = "transform") -> EntireFunction:
    """The quadrature sum ``z -> sum_j w_j f(xi_j) e^{-i z xi_j}`` (entire in z)."""
    nodes, weights = q.points(), q.weights()
    integrand = weights * _samples(f, nodes)

    def ev(z):
        z = np.asarray(z, dtype=complex)
        flat = z.ravel()
        return (np.exp(-1j * flat[:, None] * nodes[None, :]) @ integrand).reshape(z.shape)

    return EntireFunction(name, ev)


def roundtrip_check(f, xi_grid=None, q_forward: QuadratureSpec = QuadratureSpec(),
                    q_inverse: QuadratureSpec = QuadratureSpec()) -> float:
    """``max |F^{-1}(F f) - f|`` over ``xi_grid``; the forward transform is
    sampled on the inverse rule's nodes."""
    xi = xi_grid.points() if isinstance(xi_grid, GridSpec) else (
        np.linspace(-4, 4, 81) if xi_grid is None else np.asarray(xi_grid, float))
    fwd = fourier_transform(f, q_inverse.points(), q_forward)
    back = inverse_transform(fwd.values, xi, q_inverse)
    ref = _samples(f, xi) if not isinstance(f, EntireFunction) else evaluate(f, xi.astype(complex))
    return float(np.max(np.abs(back.values - ref)))


def plancherel_gap(f, q: QuadratureSpec = QuadratureSpec()) -> float:
    """Relative gap between ``int |f|^2`` and ``(1/2 pi) int |F f|^2``."""
    nodes, weights = q.points(), q.weights()
    energy = float(np.sum(weights * np.abs(_samples(f, nodes)) ** 2))
    fwd = fourier_transform(f, nodes, q).values
    dual = float(np.sum(weights * np.abs(fwd) ** 2)) / (2.0 * math.pi)
    return abs(energy - dual) / max(energy, 1e-300)


def parity_defect(f, x_grid=None, q: QuadratureSpec = QuadratureSpec()):
    """``(max |Im F f| / peak, max |F f(x) - F f(-x)| / peak)``."""
    xs = x_grid.points() if isinstance(x_grid, GridSpec) else np.linspace(0.0, 8.0, 81)
    both = fourier_transform(f, np.concatenate([xs, -xs]), q).values
    peak = float(np.max(np.abs(both))) or 1.0
    a, b = both[: xs.size], both[xs.size:]
    return float(np.max(np.abs(both.imag))) / peak, float(np.max(np.abs(a - b))) / peak


def shifted_integral(f: EntireFunction, x: float, n: int, eta: float, q: QuadratureSpec = QuadratureSpec()) -> complex:
    """``int f(xi + i eta) (-i (xi + i eta))^n e^{-i x (xi + i eta)} dxi``."""
    zeta = q.points() + 1j * eta
    vals = np.asarray(evaluate(f, zeta), dtype=complex)
    return complex(np.sum(q.weights() * vals * (-1j * zeta) ** n * np.exp(-1j * x * zeta)))


def transform_table(f, x_grid, q: QuadratureSpec, n_max: int) -> DerivativeTable:
    """Derivative table of ``F f`` filled from the weighted integrals.

    The ``radius`` column records the quadrature window (no contour is used).
    """
    res = fourier_transform(f, x_grid, q, range(n_max + 1))
    vals = np.stack([res.derivative_values[n] for n in range(n_max + 1)], axis=1)
    return DerivativeTable(res.x_grid, n_max, vals, np.full(vals.shape, q.window),
                           {"source": "fourier_transform", "window": q.window, "nodes": q.nodes,
                            "tail_bound": res.tail_bound})


def theorem3_forward_check(f: EntireFunction, w, params: SpaceParams, k_list=(0, 1, 2), x_grid=None,
                           q: QuadratureSpec = QuadratureSpec(), psistar: Optional[PsiStar] = None,
                           shift_x=(-1.3, 0.6, 2.1), shift_t=(0.5, 1.0)) -> VerificationReport:
    """``||F f||_{eps,k} <= pi p_{eps,k+2}(f)`` with both sides computed independently.

    The left side is the real-line norm of a derivative table of ``F f``; the
    right side is the plane sup of f.  A contour-shift spot check compares
    the line integral with the integral along ``Im xi = -sign(x) t``.
    """
    psistar = psistar or PsiStar(w)
    grid = x_grid or symmetric(24.0, 481)
    k_top = max(k_list)
    table = transform_table(f, grid, q, k_top)
    rows, results = [], []
    fitted = {}
    worst = math.inf
    for eps in params.epsilons:
        for k in k_list:
            lhs = g_norm(table, psistar, params.sigma, eps, k, params.k_max)
            p = p_norm(f, w, params.sigma, eps, k + 2)
            if p.divergent or lhs.inconclusive:
                status, margin = INCONCLUSIVE, math.nan
                rhs = math.inf
            else:
                rhs = math.pi * p.value
                scale = max(1.0, rhs)
                margin = (rhs - lhs.value) / scale
                status = PASS if lhs.value <= rhs + 1e-6 * scale else FAIL
                worst = min(worst, margin)
            results.append(status)
            fitted[f"ratio(eps={eps:g},k={k})"] = lhs.value / rhs if rhs not in (0.0, math.inf) else 0.0
            rows.append({"epsilon": eps, "k": k, "transform_norm": lhs.value, "pi_p_norm": rhs,
                         "p_divergent": p.divergent, "margin": margin, "k_cut": lhs.k_cut,
                         "boundary": lhs.boundary, "verdict": status})
    shift_err = 0.0
    for x in shift_x:
        for t in shift_t:
            eta = -math.copysign(1.0, x) * t
            for n in range(k_top + 1):
                base = shifted_integral(f, x, n, 0.0, q)
                moved = shifted_integral(f, x, n, eta, q)
                scale = max(abs(base), 1e-300)
                err = abs(moved - base) / scale if base != 0 else abs(moved)
                shift_err = max(shift_err, err)
    results.append(PASS if shift_err <= 1e-6 else FAIL)
    if worst == math.inf:
        worst = math.nan
    return VerificationReport(
        "theorem3", fitted, worst, params.to_dict(), verdict_of(results),
        {"x_grid": grid.to_dict(), "quadrature": {"window": q.window, "nodes": q.nodes},
         "contour_shift_max_rel_err": shift_err, "tail_bound": table.meta["tail_bound"]},
        rows,
    )


def known_transform(f: EntireFunction) -> Callable:
    """Closed-form transform of a built-in (``exp(-a x^2)`` only)."""
    if f.name == "gaussian":
        a = float(f.meta.get("a", 1.0))
        return lambda x: math.sqrt(math.pi / a) * np.exp(-np.asarray(x, dtype=float) ** 2 / (4.0 * a))
    if f.name == "zero":
        return lambda x: np.zeros(np.shape(x))
    raise InvalidParameterError(f"no closed-form transform for {f.name!r}")


def surjectivity_check(f: EntireFunction, g: Optional[Callable] = None,
                       q: QuadratureSpec = QuadratureSpec(48.0, 2048), n_max: int = 60,
                       probe_radius: float = 2.0) -> float:
    """Rebuild f from its transform ``g``: derivatives at 0 of the inverse
    transform, then a Taylor extension; returns ``max |F - f|`` on the disc.

    ``g`` defaults to the closed-form transform.  A quadrature transform is
    not used here: its round-off floor, weighted by ``x^n``, would swamp the
    high derivatives.
    """
    g = g if g is not None else known_transform(f)
    inv = inverse_transform(g, np.array([0.0]), q, range(n_max + 1))
    vals = np.array([[inv.derivative_values[n][0] for n in range(n_max + 1)]])
    table = DerivativeTable(np.array([0.0]), n_max, vals, np.full(vals.shape, q.window))
    ext = taylor_extend(table, probe_radius=probe_radius)
    r = np.linspace(0.0, probe_radius, 21)
    th = np.linspace(0.0, 2 * np.pi, 64, endpoint=False)
    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    return float(np.max(np.abs(ext(z) - evaluate(f, z))))


def derivative_consistency(f, x: float, q: QuadratureSpec = QuadratureSpec(), R: float = 0.5) -> float:
    """Relative gap between the weighted-integral first derivative of ``F f``
    and the Cauchy derivative of the quadrature sum."""
    direct = fourier_transform(f, np.array([x]), q, (1,)).derivative_values[1][0]
    cauchy = cauchy_derivative(transform_as_entire(f, q), x, 1, R=R)
    return abs(direct - cauchy) / max(abs(direct), 1e-300)


def theorem3_check(f: EntireFunction, w, params: SpaceParams, psistar: Optional[PsiStar] = None,
                   q: QuadratureSpec = QuadratureSpec(), x_grid=None) -> VerificationReport:
    """Forward bound plus the transform-pair, round-trip and surjectivity diagnostics."""
    rep = theorem3_forward_check(f, w, params, x_grid=x_grid, psistar=psistar, q=q)
    xs = np.linspace(-8.0, 8.0, 161)
    extra = {}
    results = [rep.verdict]
    if f.name == "gaussian" and f.meta.get("a", 1.0) == 1.0:
        pair = fourier_transform(f, xs, q).values
        err = float(np.max(np.abs(pair - math.sqrt(math.pi) * np.exp(-xs ** 2 / 4))))
        extra["gaussian_pair_max_abs_err"] = err
        results.append(PASS if err <= 1e-8 else FAIL)
    rt = roundtrip_check(f, np.linspace(-4, 4, 81), q, q)
    extra["roundtrip_max_abs_err"] = rt
    results.append(PASS if rt <= 1e-8 else FAIL)
    try:
        sj = surjectivity_check(f)
        extra["surjectivity_max_abs_err"] = sj
        results.append(PASS if sj <= 1e-6 else FAIL)
    except InvalidParameterError as exc:
        extra["surjectivity_skipped"] = str(exc)
    except (InsufficientDataError, WindowTooSmallError) as exc:
        extra["surjectivity_error"] = str(exc)
        results.append(INCONCLUSIVE)
    rep.diagnostics.update(extra)
    rep.verdict = verdict_of(results)
    return rep
