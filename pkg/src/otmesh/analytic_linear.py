"""
Exact doubly periodic mesh maps for separable densities along linear features.

The density is ``rho(x) = rho1(x . e1) * rho2(x . e2)`` with orthonormal
``e1 = (a, b)`` and ``e2 = (-b, a)``. Both factors are given as functions of
a *normalized* coordinate ``s = x' / p`` in which they are 1-periodic, where
``p`` is the period of the feature pattern along ``e1`` (``1/sqrt(2)`` for
features at 45 degrees in the unit square). With ``R(s) = int_0^s rho`` and
``theta_k = R_k(1)``, the map is

    x' = p * R1^{-1}(theta1 * (xi . e1) / p),   y' = p * R2^{-1}(theta2 * (xi . e2) / p)

and its Jacobian is ``theta1/rho1 e1 e1^T + theta2/rho2 e2 e2^T``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple

import numpy as np
from scipy import integrate
from scipy.interpolate import PchipInterpolator

from .density import DensityField, sech2
from .errors import DensityError
from .geometry import EigenPair2, Grid2D, MeshMapping

DEFAULT_NPRIME = 1000
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


# ---------------------------------------------------------------------------
# 1-periodic densities


@dataclass(frozen=True)
class SechSumDensity:
    """``1 + amplitude * sum_{|n| <= terms} sech^2(width (s - n))`` on one period.

    Evaluation folds ``s`` into ``[0, 1)`` so the truncated sum behaves as a
    periodic function; the neglected tail is ``O(exp(-2 width))``.
    """

    amplitude: float
    width: float
    terms: int = 3

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError("width must be positive")
        if self.amplitude <= -1:
            raise DensityError("amplitude <= -1 makes the density non-positive")

    def _shifts(self):
        return np.arange(-self.terms, self.terms + 1, dtype=float)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        f = s - np.floor(s)
        z = self.width * (f[..., None] - self._shifts())
        return 1.0 + self.amplitude * sech2(z).sum(-1)

    def _antiderivative_cell(self, f):
        n = self._shifts()
        t = np.tanh(self.width * (f[..., None] - n)) - np.tanh(-self.width * n)
        return f + self.amplitude / self.width * t.sum(-1)

    @property
    def theta(self) -> float:
        return float(self._antiderivative_cell(np.asarray(1.0)))

    def antiderivative(self, s):
        """Closed-form ``R(s)``, extended by ``R(s + k) = R(s) + k theta``."""
        s = np.asarray(s, dtype=float)
        k = np.floor(s)
        return k * self.theta + self._antiderivative_cell(s - k)

    def peak(self) -> float:
        return float(self(0.0))


@dataclass(frozen=True)
class UniformDensity1D:
    value: float = 1.0

    def __call__(self, s):
        return np.full(np.shape(s), self.value, dtype=float)

    @property
    def theta(self) -> float:
        return float(self.value)

    def antiderivative(self, s):
        return self.value * np.asarray(s, dtype=float)


# ---------------------------------------------------------------------------
# cumulative density and its inverse


@dataclass(frozen=True)
class CumulativeDensity:
    """Tabulated ``R(s) = int_0^s rho`` on ``[0, 1]`` with a monotone inverse."""

    theta: float
    s_nodes: np.ndarray
    r_nodes: np.ndarray
    rho: Callable
    closed_form: Callable | None = None
    _inverse: PchipInterpolator = field(default=None, repr=False)

    @property
    def table(self) -> np.ndarray:
        return np.column_stack([self.s_nodes, self.r_nodes])

    def _cell_value(self, f):
        """``R`` on ``[0, 1]`` (exact form, or table plus Gauss-Legendre)."""
        if self.closed_form is not None:
            return self.closed_form(f)
        n = len(self.s_nodes) - 1
        i = np.clip(np.floor(f * n).astype(int), 0, n - 1)
        s0 = self.s_nodes[i]
        half = 0.5 * (f - s0)
        pts = (s0 + half)[..., None] + half[..., None] * _GL_NODES
        return self.r_nodes[i] + half * (self.rho(pts) * _GL_WEIGHTS).sum(-1)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        k = np.floor(s)
        return k * self.theta + self._cell_value(s - k)

    def inverse(self, r, tol: float = 1e-13, max_newton: int = 40):
        """``R^{-1}(r)`` for any real ``r`` (periodic extension)."""
        r = np.asarray(r, dtype=float)
        k = np.floor(r / self.theta)
        q = np.clip(r - k * self.theta, 0.0, self.theta)
        s = np.clip(self._inverse(q), 0.0, 1.0)
        # bracket from the table, then safeguarded Newton
        j = np.clip(np.searchsorted(self.r_nodes, q, side="right") - 1, 0, len(self.s_nodes) - 2)
        lo = self.s_nodes[j].copy()
        hi = self.s_nodes[j + 1].copy()
        s = np.clip(s, lo, hi)
        for _ in range(max_newton):
            g = self._cell_value(s) - q
            lo = np.where(g < 0, s, lo)
            hi = np.where(g > 0, s, hi)
            step = g / self.rho(s)
            s_new = s - step
            out = (s_new <= lo) | (s_new >= hi)
            s_new = np.where(out, 0.5 * (lo + hi), s_new)
            done = np.all(np.abs(s_new - s) <= tol)
            s = s_new
            if done:
                break
        return k + s


def build_cumulative(rho: Callable, nprime: int = DEFAULT_NPRIME) -> CumulativeDensity:
    """Tabulate ``R`` on ``nprime + 1`` uniform samples of ``[0, 1]``.

    Densities exposing ``antiderivative`` and ``theta`` (such as
    :class:`SechSumDensity`) are tabulated from the closed form; other
    callables are integrated per table cell with adaptive quadrature.
    """
    if nprime < 100:
        raise ValueError(f"nprime must be >= 100, got {nprime}")
    s = np.linspace(0.0, 1.0, nprime + 1)
    probe = np.asarray(rho(np.linspace(0.0, 1.0, 8 * nprime + 1)), dtype=float)
    if np.any(probe <= 0) or not np.all(np.isfinite(probe)):
        raise DensityError("density must be finite and positive on [0, 1]")

    closed = getattr(rho, "antiderivative", None)
    if closed is not None:
        r = np.asarray(closed(s), dtype=float)
    else:
        cells = [
            integrate.quad(lambda t: float(rho(t)), a, b, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
            for a, b in zip(s[:-1], s[1:])
        ]
        r = np.concatenate([[0.0], np.cumsum(cells)])
    if np.any(np.diff(r) <= 0):
        raise DensityError("cumulative density is not strictly increasing")
    inv = PchipInterpolator(r, s)
    return CumulativeDensity(float(r[-1]), s, r, rho, closed, inv)


# ---------------------------------------------------------------------------
# separable density and its map


def _pattern_period(e1, max_int: int = 64) -> float:
    """Period along ``e1`` of a pattern that is 1-periodic in x and y."""
    a, b = (float(v) for v in e1)
    if abs(b) < 1e-14 or abs(a) < 1e-14:
        return 1.0
    ratio = Fraction(b / a).limit_denominator(max_int)
    if abs(float(ratio) - b / a) > 1e-12:
        raise ValueError(f"direction {e1} is not commensurate with the unit square")
    m, n = ratio.denominator, abs(ratio.numerator)
    return 1.0 / np.hypot(m, n)


@dataclass(frozen=True)
class LinearDensity:
    """Separable density aligned with the orthonormal pair ``(e1, e2)``."""

    e1: tuple[float, float]
    rho1: Callable
    rho2: Callable
    period: float | None = None

    def __post_init__(self):
        e1 = np.asarray(self.e1, dtype=float)
        if e1.shape != (2,) or abs(np.hypot(*e1) - 1.0) > 1e-12:
            raise ValueError(f"e1 must be a unit 2-vector, got {self.e1}")
        object.__setattr__(self, "e1", (float(e1[0]), float(e1[1])))
        if self.period is None:
            object.__setattr__(self, "period", _pattern_period(self.e1))

    @property
    def e2(self) -> tuple[float, float]:
        a, b = self.e1
        return (-b, a)

    def rotated(self, x, y):
        """Normalized feature coordinates ``(x . e1 / p, x . e2 / p)``."""
        a, b = self.e1
        p = self.period
        return (a * x + b * y) / p, (-b * x + a * y) / p

    def __call__(self, x, y):
        s, t = self.rotated(np.asarray(x, float), np.asarray(y, float))
        return self.rho1(s) * self.rho2(t)


def _theta_1d(rho) -> float:
    th = getattr(rho, "theta", None)
    if th is not None:
        return float(th)
    probe = np.asarray(rho(np.linspace(0.0, 1.0, 4001)), dtype=float)
    if np.any(probe <= 0) or not np.all(np.isfinite(probe)):
        raise DensityError("density must be finite and positive on [0, 1]")
    return float(integrate.quad(lambda t: float(rho(t)), 0.0, 1.0, epsabs=1e-12, limit=500)[0])


def theta_components(d: LinearDensity) -> tuple[float, float]:
    """``(theta1, theta2)``, the period averages of the two factors."""
    return _theta_1d(d.rho1), _theta_1d(d.rho2)


class LinearMap:
    """The exact map for a :class:`LinearDensity`; evaluate with ``map(xi, eta)``."""

    def __init__(self, density: LinearDensity, nprime: int = DEFAULT_NPRIME):
        self.density = density
        self.cum1 = build_cumulative(density.rho1, nprime)
        self.cum2 = build_cumulative(density.rho2, nprime)

    @property
    def theta1(self) -> float:
        return self.cum1.theta

    @property
    def theta2(self) -> float:
        return self.cum2.theta

    @property
    def theta(self) -> float:
        return self.theta1 * self.theta2

    def __call__(self, xi, eta):
        d = self.density
        sig, tau = d.rotated(np.asarray(xi, float), np.asarray(eta, float))
        p = d.period
        xp = p * self.cum1.inverse(self.theta1 * sig)
        yp = p * self.cum2.inverse(self.theta2 * tau)
        a, b = d.e1
        return a * xp - b * yp, b * xp + a * yp

    def mesh(self, n: int, layout: str = "periodic") -> MeshMapping:
        """Image of a uniform ``n x n`` grid of the unit square.

        ``layout='periodic'`` omits the duplicated last row/column; use
        ``'closed'`` to include both ends (``xi_j = j/(n-1)``).
        """
        bc = "periodic" if layout == "periodic" else "neumann"
        grid = Grid2D(n, n, (0.0, 1.0, 0.0, 1.0), bc, bc)
        xi, eta = grid.nodes()
        xs, ys = self(xi, eta)
        return MeshMapping(grid, xs, ys)

    def density_field(self) -> DensityField:
        return DensityField(self.density, self.theta, None, "linear")

    def eigenpairs_at_computational(self, xi, eta) -> EigenPair2:
        xs, ys = self(xi, eta)
        return linear_eigenvalues(self.density, (xs, ys), (self.theta1, self.theta2))


def linear_map(d: LinearDensity, xi, nprime: int = DEFAULT_NPRIME):
    """Evaluate the exact map at computational point(s) ``xi = (xi, eta)``."""
    m = LinearMap(d, nprime)
    x, y = m(*xi)
    return np.stack([x, y], -1) if np.ndim(x) else np.array([x, y])


def linear_eigenvalues(d: LinearDensity, x, thetas=None) -> EigenPair2:
    """Jacobian eigenpairs at physical point(s) ``x``.

    Labelled by direction: ``lambda1`` belongs to ``e1`` (across the first
    feature family), ``lambda2`` to ``e2``; no magnitude ordering.
    """
    th1, th2 = thetas if thetas is not None else theta_components(d)
    s, t = d.rotated(np.asarray(x[0], float), np.asarray(x[1], float))
    l1 = th1 / d.rho1(s)
    l2 = th2 / d.rho2(t)
    shape = np.shape(l1)
    e1 = np.broadcast_to(np.asarray(d.e1), shape + (2,))
    e2 = np.broadcast_to(np.asarray(d.e2), shape + (2,))
    if shape == ():
        return EigenPair2(float(l1), float(l2), np.array(d.e1), np.array(d.e2), bool(l1 == l2))
    return EigenPair2(l1, l2, e1, e2, l1 == l2)


def skewness_from_eigenvalues(l1, l2):
    return 0.5 * (l1 / l2 + l2 / l1)


def linear_skewness_profile(d: LinearDensity, x, thetas=None):
    """Skewness of the exact map at physical point(s) ``x``."""
    ep = linear_eigenvalues(d, x, thetas)
    return skewness_from_eigenvalues(ep.lambda1, ep.lambda2)


class ShockWidthSkewness(NamedTuple):
    exact: float
    asymptotic: float
    epsilon: float


def shock_width_skewness(alpha: float, theta: float) -> ShockWidthSkewness:
    """Skewness on the crest of a single sech^2 shock of peak ``1 + alpha``.

    ``exact`` is ``(r + 1/r)/2`` with ``r = (1 + alpha)/theta``. The
    leading-order large-``alpha`` value is ``alpha / (2 theta)``, written in
    terms of the shock width ``epsilon = 1/(alpha sqrt 2)`` as
    ``1 / (2 sqrt(2) theta epsilon)``.
    """
    if alpha <= 0 or theta <= 0:
        raise ValueError("alpha and theta must be positive")
    r = (1.0 + alpha) / theta
    eps = 1.0 / (alpha * np.sqrt(2.0))
    return ShockWidthSkewness(0.5 * (r + 1.0 / r), 1.0 / (2.0 * np.sqrt(2.0) * theta * eps), eps)


# ---------------------------------------------------------------------------
# ready-made examples

DIAGONAL = (1.0 / np.sqrt(2.0), 1.0 / np.sqrt(2.0))


def single_shock(alpha: float = 50.0) -> LinearDensity:
    """Periodic array of diagonal shocks of peak ``1 + alpha`` and width ``1/(alpha sqrt 2)``."""
    return LinearDensity(DIAGONAL, SechSumDensity(alpha, alpha), UniformDensity1D())


def orthogonal_shocks(
    alpha: float = 50.0, amplitude2: float = 10.0, width2: float = 25.0
) -> LinearDensity:
    """The single shock crossed by a second, weaker family along ``e2``."""
    return LinearDensity(
        DIAGONAL, SechSumDensity(alpha, alpha), SechSumDensity(amplitude2, width2)
    )
