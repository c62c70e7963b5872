"""
Exact radially symmetric mesh maps for blow-up (``a = 0``) and ring (``a > 0``)
densities ``rho(R) = 1 + alpha1 sech^2(alpha2 (R^2 - a^2))``.

A circle of radius ``r`` in the computational disc maps to the circle of
radius ``R(r)``, where ``R`` solves

    F(R) = R^2 + alpha_r tanh(alpha2 (R^2 - a^2)) + alpha_r tanh(alpha2 a^2) = theta r^2

with ``alpha_r = alpha1 / alpha2``. The Jacobian has the radial eigenvalue
``dR/dr`` and the tangential eigenvalue ``R/r``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy import integrate, optimize
from scipy.interpolate import PchipInterpolator

from .density import DensityField, sech2
from .errors import OTMeshError
from .geometry import EigenPair2, Grid2D, MeshMapping

THETA_MATCH_TOL = 1e-6
TABLE_SIZE = 4096


@dataclass(frozen=True)
class RadialDensity:
    """Parameters of the sech^2 radial density and of the disc-to-disc map.

    ``theta`` is the normalization. Left as ``None`` it is the exact value
    ``F(R_star) / r_star^2`` (the integral of ``rho`` over the physical disc
    divided by the computational area). A supplied value must agree with
    that integral to within ``1e-6``, unless the radii are ``None``
    (surrogate use, where theta comes from some other density).
    """

    alpha1: float
    alpha2: float
    a: float = 0.0
    r_star: float | None = 0.5
    R_star: float | None = 0.5
    theta: float | None = None

    def __post_init__(self):
        if self.alpha1 < 0 or self.alpha2 <= 0:
            raise ValueError(f"need alpha1 >= 0 and alpha2 > 0, got {self.alpha1}, {self.alpha2}")
        if self.a < 0:
            raise ValueError(f"feature radius must be >= 0, got {self.a}")
        have_radii = self.r_star is not None and self.R_star is not None
        if have_radii and (self.r_star <= 0 or self.R_star <= 0):
            raise ValueError("boundary radii must be positive")
        if have_radii:
            exact = float(self.F(self.R_star)) / self.r_star**2
            if self.theta is None:
                object.__setattr__(self, "theta", exact)
            elif abs(self.theta - exact) > THETA_MATCH_TOL * max(1.0, exact):
                raise ValueError(
                    f"supplied theta={self.theta!r} disagrees with the integral of rho "
                    f"over the disc ({exact!r}) by more than {THETA_MATCH_TOL}"
                )
        elif self.theta is None:
            raise ValueError("theta must be supplied when the boundary radii are not")
        object.__setattr__(self, "theta", float(self.theta))

    @property
    def alpha_r(self) -> float:
        return self.alpha1 / self.alpha2

    @property
    def gamma(self) -> float:
        return self.alpha_r if self.a == 0 else 2.0 * self.alpha_r

    def rho(self, R):
        R = np.asarray(R, dtype=float)
        return 1.0 + self.alpha1 * sech2(self.alpha2 * (R * R - self.a**2))

    def __call__(self, x, y):
        return self.rho(np.hypot(x, y))

    def F(self, R):
        """``2 int_0^R rho(s) s ds`` in closed form."""
        R = np.asarray(R, dtype=float)
        a2 = self.a**2
        return R * R + self.alpha_r * (np.tanh(self.alpha2 * (R * R - a2)) + np.tanh(self.alpha2 * a2))

    def dF(self, R):
        return 2.0 * np.asarray(R, dtype=float) * self.rho(R)

    def density_field(self, center=(0.0, 0.0)) -> DensityField:
        cx, cy = center
        return DensityField(lambda x, y: self.rho(np.hypot(x - cx, y - cy)), None, None, "radial")


def theta_from_boundary(d: RadialDensity) -> float:
    """Large-``alpha2`` normalization ``(R*^2 + gamma) / r*^2``."""
    if d.r_star is None or d.R_star is None:
        raise ValueError("boundary radii are required")
    return (d.R_star**2 + d.gamma) / d.r_star**2


def F_of_R(d: RadialDensity, R):
    if np.any(np.asarray(R) < 0):
        raise ValueError("R must be >= 0")
    out = d.F(R)
    return float(out) if np.ndim(out) == 0 else out


def solve_R(d: RadialDensity, target, bisect_tol: float = 1e-10, newton_steps: int = 5):
    """Root ``R >= 0`` of ``F(R) = target`` by bisection then Newton (vectorized)."""
    target = np.asarray(target, dtype=float)
    # F(R) >= R^2 gives an upper bracket; F(R) <= R^2 + 2 alpha_r a lower one
    lo = np.sqrt(np.maximum(target - 2.0 * d.alpha_r, 0.0))
    hi = np.sqrt(target)
    while np.any(hi - lo > bisect_tol):
        mid = 0.5 * (lo + hi)
        below = d.F(mid) < target
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    R = 0.5 * (lo + hi)
    for _ in range(newton_steps):
        slope = d.dF(R)
        step = np.where(slope > 0, (d.F(R) - target) / np.where(slope > 0, slope, 1.0), 0.0)
        R_new = np.clip(R - step, lo - bisect_tol, hi + bisect_tol)
        if np.all(np.abs(R_new - R) <= 1e-16 * np.maximum(R, 1.0)):
            R = R_new
            break
        R = R_new
    return np.maximum(R, 0.0)


class RadialMap:
    """Disc-to-disc map ``r -> R(r)`` of a :class:`RadialDensity`.

    Exact evaluation solves ``F(R) = theta r^2`` per point; :meth:`R_fast`
    uses a monotone table of ``TABLE_SIZE`` samples clustered near the
    feature.
    """

    def __init__(self, density: RadialDensity, table_size: int = TABLE_SIZE):
        self.density = density
        self.theta = density.theta
        rmax = density.r_star if density.r_star is not None else 1.0
        self._rmax = rmax
        r1, r2 = region_radii(density)
        base = np.linspace(0.0, rmax, table_size // 2)
        clusters = []
        for rc in (r1, r2):
            if 0 < rc < rmax:
                width = max(1.0 / (density.alpha2 * max(density.a, 1e-3)), 1e-3)
                clusters.append(rc + width * np.sinh(np.linspace(-4, 4, table_size // 4)) / np.sinh(4))
        r = np.unique(np.clip(np.concatenate([base] + clusters), 0.0, rmax))
        self._r_table = r
        self._R_table = solve_R(density, self.theta * r * r)
        self._interp = PchipInterpolator(self._r_table, self._R_table)
        self._P_table = None

    @property
    def r_star(self):
        return self.density.r_star

    @property
    def R_star(self):
        return self.density.R_star

    def R(self, r, allow_outside: bool = True):
        r = np.asarray(r, dtype=float)
        if np.any(r < 0):
            raise ValueError("r must be >= 0")
        if not allow_outside and self.r_star is not None and np.any(r > self.r_star * (1 + 1e-12)):
            raise ValueError(f"r outside the computational disc [0, {self.r_star}]")
        out = solve_R(self.density, self.theta * r * r)
        return float(out) if out.ndim == 0 else out

    def R_fast(self, r):
        r = np.asarray(r, dtype=float)
        inside = r <= self._rmax
        out = np.where(inside, self._interp(np.minimum(r, self._rmax)), 0.0)
        if np.any(~inside):
            out = np.where(inside, out, solve_R(self.density, self.theta * r * r))
        return out

    def dRdr(self, r, R=None):
        r = np.asarray(r, dtype=float)
        if R is None:
            R = self.R(r)
        rho0 = self.density.rho(0.0)
        core = np.sqrt(self.theta / rho0)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = self.theta * r / (np.asarray(R) * self.density.rho(R))
        return np.where(r > 0, val, core)

    def potential(self, r):
        """``P(r) = int_0^r R(s) ds`` so that ``grad P`` is the map."""
        r = np.asarray(r, dtype=float)
        if self._P_table is None:
            nodes = np.linspace(0.0, max(self._rmax, 1.0), 4001)
            g, w = np.polynomial.legendre.leggauss(12)
            half = 0.5 * np.diff(nodes)
            pts = (nodes[:-1] + half)[:, None] + half[:, None] * g
            cells = half * (self.R(pts) * w).sum(-1)
            self._P_table = (nodes, np.concatenate([[0.0], np.cumsum(cells)]))
        nodes, P = self._P_table
        if np.any(r > nodes[-1]):
            raise ValueError("r beyond the tabulated potential range")
        i = np.clip(np.searchsorted(nodes, r, side="right") - 1, 0, len(nodes) - 2)
        g, w = np.polynomial.legendre.leggauss(12)
        half = 0.5 * (r - nodes[i])
        pts = (nodes[i] + half)[..., None] + half[..., None] * g
        return P[i] + half * (self.R(pts) * w).sum(-1)

    def map(self, xi, eta, allow_outside: bool = False):
        xi = np.asarray(xi, dtype=float)
        eta = np.asarray(eta, dtype=float)
        r = np.hypot(xi, eta)
        R = self.R(r, allow_outside=allow_outside)
        with np.errstate(divide="ignore", invalid="ignore"):
            scale = np.where(r > 0, R / np.where(r > 0, r, 1.0), 0.0)
        return scale * xi, scale * eta

    def mesh(self, grid: Grid2D) -> MeshMapping:
        """Image of a grid; nodes outside the disc use the same radial relation."""
        xi, eta = grid.nodes()
        xs, ys = self.map(xi, eta, allow_outside=True)
        return MeshMapping(grid, xs, ys)

    def density_field(self) -> DensityField:
        return DensityField(self.density, self.theta, None, "radial")


def region_radii(d: RadialDensity) -> tuple[float, float]:
    """Computational radii bounding the feature region.

    For ``a = 0`` only ``r1`` (core edge, ``sqrt((1 + alpha1)/(alpha2 theta))``)
    is meaningful and ``r2 = r1``. For a ring, ``r1`` and ``r2`` are the
    preimages of ``sqrt(a^2 -/+ 1/alpha2)``.
    """
    th = d.theta
    if d.a == 0:
        r1 = np.sqrt((1.0 + d.alpha1) / (d.alpha2 * th))
        return float(r1), float(r1)
    r1 = np.sqrt(max(d.a**2 - 1.0 / d.alpha2, 0.0) / th)
    r2 = np.sqrt((d.a**2 + 1.0 / d.alpha2 + 2.0 * d.alpha_r) / th)
    return float(r1), float(r2)


def radial_R_of_r(m: RadialMap, r):
    """Exact ``R(r)`` on ``[0, r*]``."""
    return m.R(r, allow_outside=False)


def radial_map_2d(m: RadialMap, xi, allow_outside: bool = False) -> np.ndarray:
    """Map computational point(s) ``xi`` (last axis of length 2)."""
    xi = np.asarray(xi, dtype=float)
    x, y = m.map(xi[..., 0], xi[..., 1], allow_outside=allow_outside)
    return np.stack([x, y], -1)


def radial_eigenpairs(m: RadialMap, xi) -> EigenPair2:
    """Radial/tangential eigenpairs at computational point(s) ``xi``.

    ``lambda1 = dR/dr`` belongs to the radial direction, ``lambda2 = R/r``
    to the tangential one. At the origin both equal ``sqrt(theta/rho(0))``
    and the pair is flagged degenerate.
    """
    xi = np.asarray(xi, dtype=float)
    r = np.hypot(xi[..., 0], xi[..., 1])
    R = m.R(r, allow_outside=True)
    at0 = r == 0
    core = np.sqrt(m.theta / m.density.rho(0.0))
    safe_r = np.where(at0, 1.0, r)
    l2 = np.where(at0, core, R / safe_r)
    l1 = np.where(at0, core, m.dRdr(r, R))
    e1 = np.where(at0[..., None], np.array([1.0, 0.0]), xi / safe_r[..., None])
    e2 = np.stack([-e1[..., 1], e1[..., 0]], -1)
    e2 = np.where(at0[..., None], np.array([0.0, 1.0]), e2)
    if r.ndim == 0:
        return EigenPair2(float(l1), float(l2), e1, e2, bool(at0))
    return EigenPair2(l1, l2, e1, e2, at0)


class RadialSkewness(NamedTuple):
    approx: np.ndarray | float
    exact: np.ndarray | float


def _qs(ratio):
    return 0.5 * (ratio + 1.0 / ratio)


def radial_skewness_profile(m: RadialMap, r) -> RadialSkewness:
    """Piecewise closed-form skewness and the exact value at radius ``r``.

    The approximation splits ``r`` at the region radii of
    :func:`region_radii`; ``rho`` is evaluated at the piecewise
    approximation of ``R`` in each region.
    """
    d = m.density
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise ValueError("r must be >= 0")
    th = m.theta
    r1, r2 = region_radii(d)
    t = th * r * r
    with np.errstate(divide="ignore", invalid="ignore"):
        if d.a == 0:
            inner_R = r * np.sqrt(th / (1.0 + d.alpha1))
            outer_R = np.sqrt(np.maximum(t - d.alpha_r, 0.0))
            R_app = np.where(r < r1, inner_R, outer_R)
            rho = d.rho(R_app)
            inner = _qs((1.0 + d.alpha1) / rho)
            outer = _qs(t / (rho * (t - d.alpha_r)))
            approx = np.where(r < r1, inner, outer)
        else:
            mid_arg = t - d.alpha_r + d.alpha1 * d.a**2
            R_app = np.where(
                r < r1, np.sqrt(t),
                np.where(r < r2, np.sqrt(np.maximum(mid_arg, 0.0) / (1.0 + d.alpha1)),
                         np.sqrt(np.maximum(t - 2.0 * d.alpha_r, 0.0))),
            )
            rho = d.rho(R_app)
            inner = _qs(rho)
            middle = _qs(t * (1.0 + d.alpha1) / (rho * mid_arg))
            outer = _qs(t / (rho * (t - 2.0 * d.alpha_r)))
            approx = np.where(r < r1, inner, np.where(r < r2, middle, outer))
    approx = np.where(r == 0, 1.0, approx)
    R = m.R(r, allow_outside=True)
    safe_r = np.where(r > 0, r, 1.0)
    exact = np.where(r > 0, _qs(m.dRdr(r, R) / np.where(r > 0, R / safe_r, 1.0)), 1.0)
    if r.ndim == 0:
        return RadialSkewness(float(approx), float(exact))
    return RadialSkewness(approx, exact)


def boundary_skewness(d: RadialDensity) -> float:
    """Skewness at the disc boundary, ``(q + 1/q)/2`` with ``q = 1 + gamma/R*^2``."""
    q = 1.0 + d.gamma / d.R_star**2
    return float(_qs(q))


def qs_max_blowup(alpha1: float) -> float:
    """Approximate peak skewness of the blow-up mesh, attained near ``R = 2/sqrt(alpha2)``."""
    if alpha1 < 0:
        raise ValueError("alpha1 must be >= 0")
    t4 = np.tanh(4.0)
    den = 4.0 - alpha1 * (1.0 - t4)
    if den <= 0:
        raise OTMeshError(
            f"formula out of validity range: alpha1={alpha1} >= {4.0 / (1.0 - t4):.1f}"
        )
    return float(_qs((4.0 + alpha1 * t4) / den))


def radial_relation_nd(d: RadialDensity, r: float, n: int, theta: float | None = None) -> float:
    """``R`` solving ``int_0^R rho(s) s^{n-1} ds = theta r^n / n``.

    Without ``theta`` the n-dimensional normalization of the ball
    ``r* -> R*`` is used (for ``n = 2`` this is the density's own theta).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if r < 0:
        raise ValueError("r must be >= 0")

    def mass(R):
        if R <= 0:
            return 0.0
        pts = _breakpoints(d, R)
        return integrate.quad(lambda s: float(d.rho(s)) * s ** (n - 1), 0.0, R,
                              points=pts, epsabs=1e-14, epsrel=1e-13, limit=400)[0]

    if theta is None:
        if d.r_star is None or d.R_star is None:
            raise ValueError("theta is required when the boundary radii are not set")
        theta = n * mass(d.R_star) / d.r_star**n
    target = theta * r**n / n
    if target == 0:
        return 0.0
    hi = max(r * theta ** (1.0 / n), 1e-12)
    while mass(hi) < target:
        hi *= 2.0
    return float(optimize.brentq(lambda R: mass(R) - target, 0.0, hi, xtol=1e-15, rtol=1e-15, maxiter=200))


def _breakpoints(d: RadialDensity, R):
    pts = [p for p in (d.a - 2.0 / (d.alpha2 * max(d.a, 1e-12)), d.a,
                       d.a + 2.0 / (d.alpha2 * max(d.a, 1e-12)), 1.0 / np.sqrt(d.alpha2))
           if 0 < p < R]
    return pts or None


# ---------------------------------------------------------------------------
# presets

def blowup(alpha1: float = 10.0, alpha2: float = 200.0, **kw) -> RadialDensity:
    return RadialDensity(alpha1, alpha2, 0.0, **kw)


def ring(alpha1: float = 10.0, alpha2: float = 200.0, a: float = 0.25, **kw) -> RadialDensity:
    return RadialDensity(alpha1, alpha2, a, **kw)
