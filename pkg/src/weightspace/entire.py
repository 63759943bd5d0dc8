"""Entire functions, Cauchy-circle derivatives and Taylor extension.

Derivatives come from the trapezoid rule on a circle around the base point,
which is spectrally accurate for entire integrands.  The circle radius is
picked per derivative order to minimise the Cauchy bound
``max_{|z - x| = r} |f(z)| * n! / r^n``; that keeps round-off proportional to
the size of the derivative itself.
"""
from __future__ import annotations

import io
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import gammaln

from .conjugate import GridFunction, fmt_float, golden_max
from .errors import InsufficientDataError, InvalidParameterError
from .grids import GridSpec

MAX_ORDER = 170  # 171! overflows a double


@dataclass(frozen=True)
class EntireFunction:
    """A complex-plane evaluator with optional closed-form side information.

    Attributes
    ----------
    evaluate : callable
        Complex array to complex array.
    taylor : callable, optional
        ``taylor(n_max)`` returns the coefficients ``c_0 .. c_{n_max}`` at 0.
    growth_certificate : callable, optional
        ``(m, y) -> bound`` on ``sup_x (1+|x+iy|)^m |f(x+iy)|``.
    log_abs : callable, optional
        Overflow-free ``log|f(z)|``.
    """

    name: str
    evaluate: Callable
    taylor: Optional[Callable] = None
    growth_certificate: Optional[Callable] = None
    log_abs: Optional[Callable] = None
    meta: dict = field(default_factory=dict, compare=False)

    def __call__(self, z):
        return evaluate(self, z)

    def __add__(self, other: "EntireFunction") -> "EntireFunction":
        taylor = None
        if self.taylor is not None and other.taylor is not None:
            def taylor(n_max, a=self.taylor, b=other.taylor):
                return np.asarray(a(n_max), complex) + np.asarray(b(n_max), complex)
        cert = None
        if self.growth_certificate is not None and other.growth_certificate is not None:
            def cert(m, y, a=self.growth_certificate, b=other.growth_certificate):
                return a(m, y) + b(m, y)
        return EntireFunction(
            f"({self.name}+{other.name})",
            lambda z, a=self.evaluate, b=other.evaluate: a(z) + b(z),
            taylor,
            cert,
            None,
        )

    def __mul__(self, scalar) -> "EntireFunction":
        a = complex(scalar)
        if a == 0:
            return zero()
        taylor = None if self.taylor is None else (lambda n_max, t=self.taylor: a * np.asarray(t(n_max), complex))
        cert = None
        if self.growth_certificate is not None:
            def cert(m, y, g=self.growth_certificate):
                return abs(a) * g(m, y)
        log_abs = None if self.log_abs is None else (lambda z, la=self.log_abs: la(z) + math.log(abs(a)))
        return EntireFunction(f"{scalar}*{self.name}", lambda z, f=self.evaluate: a * f(z), taylor, cert, log_abs)

    __rmul__ = __mul__


def evaluate(f: EntireFunction, z):
    """``f(z)``; an overflowed value is returned as ``inf`` (infinite magnitude)."""
    z = np.asarray(z, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(f.evaluate(z), dtype=complex)
    bad = ~np.isfinite(out)
    if np.any(bad):
        out = np.where(bad, complex(np.inf, 0.0), out)
    return out if out.ndim else complex(out)


def log_abs(f: EntireFunction, z):
    """``log|f(z)|`` through the closed form when present."""
    z = np.asarray(z, dtype=complex)
    if f.log_abs is not None:
        return np.asarray(f.log_abs(z), dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(evaluate(f, z)))


# --------------------------------------------------------------------------
# built-ins


def gaussian(a: float = 1.0) -> EntireFunction:
    """``exp(-a z^2)``."""
    if not a > 0:
        raise InvalidParameterError("gaussian needs a > 0")

    def ev(z):
        return np.exp(-a * z * z)

    def taylor(n_max):
        c = np.zeros(n_max + 1, dtype=complex)
        k = np.arange(0, n_max // 2 + 1)
        c[0::2] = np.exp(k * math.log(a) - gammaln(k + 1)) * (-1.0) ** k
        return c

    def cert(m, y):
        return (1.0 + abs(y) + math.sqrt(m / (2.0 * a))) ** m * math.exp(a * y * y)

    def la(z):
        return -a * (z.real ** 2 - z.imag ** 2)

    return EntireFunction("gaussian", ev, taylor, cert, la, {"a": a})


def exp_fn() -> EntireFunction:
    def taylor(n_max):
        n = np.arange(n_max + 1)
        return np.exp(-gammaln(n + 1)).astype(complex)

    return EntireFunction("exp", np.exp, taylor, None, lambda z: z.real)


def square() -> EntireFunction:
    def taylor(n_max):
        c = np.zeros(n_max + 1, dtype=complex)
        if n_max >= 2:
            c[2] = 1.0
        return c

    def la(z):
        with np.errstate(divide="ignore"):
            return 2.0 * np.log(np.abs(z))

    return EntireFunction("square", lambda z: z * z, taylor, None, la)


def constant(c: float = 1.0) -> EntireFunction:
    def taylor(n_max):
        out = np.zeros(n_max + 1, dtype=complex)
        out[0] = c
        return out

    def la(z):
        with np.errstate(divide="ignore"):
            return np.full(np.shape(z), math.log(abs(c)) if c != 0 else -math.inf)

    return EntireFunction("constant", lambda z: np.full(np.shape(z), complex(c)), taylor, None, la, {"c": c})


def zero() -> EntireFunction:
    return EntireFunction(
        "zero",
        lambda z: np.zeros(np.shape(z), dtype=complex),
        lambda n_max: np.zeros(n_max + 1, dtype=complex),
        lambda m, y: 0.0,
        lambda z: np.full(np.shape(z), -math.inf),
    )


BUILTINS = {
    "gaussian": gaussian,
    "exp": exp_fn,
    "square": square,
    "constant": constant,
    "zero": zero,
}


def make_function(name: str, **params) -> EntireFunction:
    if name not in BUILTINS:
        raise InvalidParameterError(f"unknown function {name!r}; expected one of {sorted(BUILTINS)}")
    return BUILTINS[name](**params)


def parse_function(text: str) -> EntireFunction:
    """Parse ``name`` or ``name:value`` / ``name:key=value``."""
    name, _, rest = text.partition(":")
    name = name.strip()
    params = {}
    for item in filter(None, (s.strip() for s in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            key, val = {"gaussian": "a", "constant": "c"}.get(name, "value"), key
        params[key.strip()] = float(val)
    return make_function(name, **params)


# --------------------------------------------------------------------------
# Cauchy derivatives


def _candidate_radii(n_max: int) -> np.ndarray:
    return np.geomspace(0.05, max(4.0, 2.0 * n_max + 2.0), 25)


def _circle_coefficients(f, x, r, nodes):
    """Trapezoid Taylor coefficients ``a_n r^n`` of f around x, and ``log max|f|``."""
    theta = 2.0 * np.pi * np.arange(nodes) / nodes
    z = x + r * np.exp(1j * theta)
    vals = evaluate(f, z)
    with np.errstate(over="ignore", invalid="ignore"):
        scaled = np.fft.fft(vals) / nodes
    if f.log_abs is not None:
        log_max = float(np.max(log_abs(f, z)))
    else:
        with np.errstate(divide="ignore"):
            log_max = float(np.log(np.max(np.abs(vals))))
    if not np.all(np.isfinite(vals)):
        log_max = math.inf
    return scaled, log_max


def _derivatives_at(f, x, n_max, nodes=None, radius=None):
    """All derivatives ``0..n_max`` at x with the radius chosen per order."""
    nodes = int(nodes or max(128, 4 * n_max))
    n = np.arange(n_max + 1)
    radii = np.array([radius]) if radius is not None else _candidate_radii(n_max)
    best_bound = np.full(n_max + 1, np.inf)
    best_val = np.zeros(n_max + 1, dtype=complex)
    best_r = np.full(n_max + 1, np.nan)
    for r in radii:
        scaled, log_max = _circle_coefficients(f, x, r, nodes)
        if not math.isfinite(log_max) and log_max > 0:
            continue
        bound = log_max - n * math.log(r)
        better = bound < best_bound
        if radius is not None:
            better[:] = True
        if not np.any(better):
            continue
        log_scale = gammaln(n + 1) - n * math.log(r)
        with np.errstate(over="ignore", invalid="ignore"):
            vals = scaled[: n_max + 1] * np.exp(log_scale)
        best_bound = np.where(better, bound, best_bound)
        best_val = np.where(better, vals, best_val)
        best_r = np.where(better, r, best_r)
    if np.any(np.isnan(best_r)):
        raise InvalidParameterError(f"f overflows on every contour around x={x}; use a smaller radius")
    return best_val, best_r


def cauchy_derivative(f: EntireFunction, x: float, n: int, R: Optional[float] = None, nodes: Optional[int] = None,
                      full_output: bool = False):
    """``f^{(n)}(x)`` from the trapezoid rule on ``|z - x| = R``.

    Parameters
    ----------
    R : float, optional
        Contour radius.  By default the radius minimising the Cauchy bound is
        chosen from a geometric candidate list.
    nodes : int, optional
        Quadrature nodes, default ``max(64, 4n)``; at least 16.
    full_output : bool
        Also return ``(radius, imag_ratio)`` where ``imag_ratio`` is
        ``|Im| / |value|`` (a diagnostic for functions real on the line).
    """
    if n < 0 or int(n) != n:
        raise InvalidParameterError("n must be a nonnegative integer")
    if n > MAX_ORDER:
        raise InvalidParameterError(f"n must be <= {MAX_ORDER}")
    if R is not None and not R > 0:
        raise InvalidParameterError("R must be positive")
    nodes = int(nodes or max(64, 4 * n))
    if nodes < 16:
        raise InvalidParameterError("nodes must be >= 16")
    if nodes <= n:
        raise InvalidParameterError("nodes must exceed n")
    vals, radii = _derivatives_at(f, float(x), int(n), nodes=nodes, radius=R)
    value = complex(vals[n])
    if not full_output:
        return value
    mag = abs(value)
    ratio = abs(value.imag) / mag if mag > 0 else 0.0
    return value, float(radii[n]), ratio


@dataclass
class DerivativeTable:
    """``f^{(n)}(x)`` for each sample x and ``0 <= n <= n_max``."""

    xs: np.ndarray
    n_max: int
    values: np.ndarray  # shape (len(xs), n_max + 1), complex
    radius: np.ndarray  # same shape
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.values = np.asarray(self.values, dtype=complex)
        self.radius = np.asarray(self.radius, dtype=float)
        shape = (self.xs.size, self.n_max + 1)
        if self.values.shape != shape or self.radius.shape != shape:
            raise InvalidParameterError(f"derivative table arrays must have shape {shape}")
        if not np.all(np.isfinite(self.values)):
            raise InvalidParameterError("derivative table entries must be finite")
        if not np.all(self.radius > 0):
            raise InvalidParameterError("derivative table radii must be positive")

    def log_abs(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(np.abs(self.values))

    def at(self, x: float) -> np.ndarray:
        hit = np.flatnonzero(np.isclose(self.xs, x, rtol=0, atol=1e-12))
        if hit.size == 0:
            raise InvalidParameterError(f"x={x} is not a table sample")
        return self.values[hit[0]]

    def scaled(self, a: complex) -> "DerivativeTable":
        return DerivativeTable(self.xs, self.n_max, a * self.values, self.radius, dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("x,n,value_re,value_im,radius\n")
        for i, x in enumerate(self.xs):
            for n in range(self.n_max + 1):
                v = self.values[i, n]
                buf.write(f"{fmt_float(x)},{n},{fmt_float(v.real)},{fmt_float(v.imag)},{fmt_float(self.radius[i, n])}\n")
        return buf.getvalue()


def derivative_table(f: EntireFunction, xs, n_max: int, nodes: Optional[int] = None) -> DerivativeTable:
    """Cauchy derivatives of f at each x for orders ``0..n_max``."""
    if n_max < 0 or n_max > MAX_ORDER:
        raise InvalidParameterError(f"n_max must lie in [0, {MAX_ORDER}]")
    xs = xs.points() if isinstance(xs, GridSpec) else np.atleast_1d(np.asarray(xs, dtype=float))
    vals = np.empty((xs.size, n_max + 1), dtype=complex)
    rad = np.empty((xs.size, n_max + 1))
    for i, x in enumerate(xs):
        vals[i], rad[i] = _derivatives_at(f, float(x), n_max, nodes)
    return DerivativeTable(xs, n_max, vals, rad, {"function": f.name})


# --------------------------------------------------------------------------
# Taylor extension


def _tail_bound(c_abs, N, R):
    """Bound on ``sum_{n > N} |c_n| R^n`` including a geometric extrapolation
    past the last available coefficient."""
    n = np.arange(c_abs.size)
    with np.errstate(divide="ignore"):
        logt = np.log(c_abs) + n * math.log(R)
    terms = np.exp(np.minimum(logt, 700.0))
    inside = float(np.sum(terms[N + 1:]))
    if not np.any(c_abs):
        return 0.0
    if c_abs.size < 16:
        # too few coefficients to extrapolate the tail
        return math.inf
    last, prev = terms[-8:], terms[-16:-8]
    b2, b1 = float(np.max(last)), float(np.max(prev))
    if b2 == 0.0:
        return inside
    if b1 == 0.0:
        return math.inf
    q = (b2 / b1) ** (1.0 / 8.0)
    if q >= 1.0:
        return math.inf
    return inside + b2 * q / (1.0 - q)


@dataclass(frozen=True)
class TaylorExtension:
    """Polynomial evaluator built from Taylor coefficients at 0."""

    coefficients: np.ndarray
    degree: int
    tail_bound: float
    probe_radius: float
    valid_radius: float

    def __call__(self, z):
        z = np.asarray(z, dtype=complex)
        out = np.zeros(z.shape, dtype=complex)
        for c in self.coefficients[::-1]:
            out = out * z + c
        return out

    def as_entire(self, name: str = "taylor") -> EntireFunction:
        coeffs = self.coefficients

        def taylor(n_max):
            out = np.zeros(n_max + 1, dtype=complex)
            k = min(n_max + 1, coeffs.size)
            out[:k] = coeffs[:k]
            return out

        return EntireFunction(name, self.__call__, taylor, None, None,
                              {"degree": self.degree, "valid_radius": self.valid_radius})


def taylor_extend(table: DerivativeTable, probe_radius: float = 2.0, tail_tol: float = 1e-10) -> TaylorExtension:
    """Taylor series at 0 from the table row at ``x = 0``.

    The truncation degree is the smallest N whose tail bound on
    ``|z| <= probe_radius`` is below ``tail_tol``; :class:`InsufficientDataError`
    is raised when no ``N <= n_max`` closes it.  The evaluator keeps every
    available coefficient; ``valid_radius`` is the largest radius at which the
    full-degree tail bound stays below ``tail_tol``.
    """
    row = table.at(0.0)
    n = np.arange(table.n_max + 1)
    coeffs = row * np.exp(-gammaln(n + 1))
    c_abs = np.abs(coeffs)
    degree = None
    for N in range(table.n_max + 1):
        tb = _tail_bound(c_abs, N, probe_radius)
        if tb < tail_tol:
            degree = N
            break
    if degree is None:
        raise InsufficientDataError(
            f"Taylor tail on |z| <= {probe_radius} not below {tail_tol} within n_max={table.n_max}")
    tail = _tail_bound(c_abs, degree, probe_radius)
    valid = probe_radius
    for R in np.linspace(probe_radius, 10.0 * probe_radius, 91):
        if _tail_bound(c_abs, table.n_max, R) < tail_tol:
            valid = float(R)
        else:
            break
    if not np.any(c_abs):
        valid = math.inf
    return TaylorExtension(coeffs, degree, tail, float(probe_radius), valid)


# --------------------------------------------------------------------------
# growth profile


def growth_profile(f: EntireFunction, m: int, y_grid, x_window, log: bool = False) -> GridFunction:
    """``sup_x (1+|x+iy|)^m |f(x+iy)|`` for each y.

    The sup is a grid scan over ``x_window`` refined by golden section inside
    the best cell.  ``meta["boundary"]`` flags rows whose maximiser sits on the
    window edge.  With ``log=True`` the logarithm is returned (no overflow).
    """
    if m < 0:
        raise InvalidParameterError("m must be nonnegative")
    ys = y_grid.points() if isinstance(y_grid, GridSpec) else np.asarray(y_grid, dtype=float)
    xs = x_window.points() if isinstance(x_window, GridSpec) else np.asarray(x_window, dtype=float)

    def logval(x, y):
        z = x + 1j * y
        return m * np.log1p(np.abs(z)) + log_abs(f, z)

    grid = logval(xs[None, :], ys[:, None])
    idx = np.argmax(grid, axis=1)
    best = grid[np.arange(ys.size), idx]
    left = xs[np.maximum(idx - 1, 0)]
    right = xs[np.minimum(idx + 1, xs.size - 1)]
    finite_rows = np.isfinite(best)
    if np.any(finite_rows):
        def objective(t, lanes):
            return logval(t, ys[lanes])

        _, refined = golden_max(objective, left, right)
        best = np.where(finite_rows, np.maximum(best, refined), best)
    boundary = (idx == 0) | (idx == xs.size - 1)
    boundary &= finite_rows
    vals = best if log else np.exp(best)
    if log:
        vals = np.where(np.isneginf(vals), -1e300, vals)
    meta = {
        "source": "growth_profile",
        "function": f.name,
        "m": int(m),
        "log": bool(log),
        "x_window": [float(xs[0]), float(xs[-1])],
        "boundary_rows": int(np.count_nonzero(boundary)),
        "boundary": boundary.tolist(),
    }
    return GridFunction(ys, vals, meta)
