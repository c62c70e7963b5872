"""
Local models for the mesh geometry along curved features.

A feature is the zero set of a level-set function ``Psi``. Two surrogates
predict the Jacobian of an equidistributed mesh near it:

- ``linear``: the feature is locally straight. Normal eigenvalue
  ``theta/rho``, tangential eigenvalue 1, normal ``grad Psi / |grad Psi|``.
- ``radial``: the feature is locally an arc of a ring of radius ``a``
  about ``center``; eigenpairs come from the exact radial map.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize

from .analytic_radial import RadialDensity
from .density import DensityField, sech2
from .errors import DegenerateElementError, OTMeshError
from .geometry import Jacobian2, MeshMapping, MetricTensor2, eig_sym2

BOUNDARY_CELLS = 3


@dataclass(frozen=True)
class FeatureCurve:
    """Level-set description of a feature, ``Psi(x, y) = 0``.

    ``grad`` and ``hess`` are optional analytic derivatives; central
    differences with step ``fd_step`` are used when they are missing.
    """

    psi: Callable
    grad: Callable | None = None
    hess: Callable | None = None
    fd_step: float = 1e-5

    def gradient(self, x, y):
        if self.grad is not None:
            gx, gy = self.grad(x, y)
            return np.asarray(gx, float), np.asarray(gy, float)
        h = self.fd_step
        return (
            (self.psi(x + h, y) - self.psi(x - h, y)) / (2 * h),
            (self.psi(x, y + h) - self.psi(x, y - h)) / (2 * h),
        )

    def hessian(self, x, y):
        if self.hess is not None:
            return tuple(np.asarray(v, float) for v in self.hess(x, y))
        h = self.fd_step ** 0.5 * 1e-2
        f = self.psi
        c = f(x, y)
        pxx = (f(x + h, y) - 2 * c + f(x - h, y)) / h**2
        pyy = (f(x, y + h) - 2 * c + f(x, y - h)) / h**2
        pxy = (f(x + h, y + h) - f(x + h, y - h) - f(x - h, y + h) + f(x - h, y - h)) / (4 * h * h)
        return pxx, pxy, pyy

    def normal(self, x, y):
        gx, gy = self.gradient(x, y)
        norm = np.hypot(gx, gy)
        if np.any(norm == 0):
            raise DegenerateElementError("grad Psi vanishes; feature normal undefined")
        return np.stack([gx / norm, gy / norm], -1)

    def curvature_radius(self, x, y):
        """Level-set radius of curvature ``|grad Psi|^3 / |Psi_xx Psi_y^2 - 2 Psi_xy Psi_x Psi_y + Psi_yy Psi_x^2|``."""
        gx, gy = self.gradient(x, y)
        pxx, pxy, pyy = self.hessian(x, y)
        num = np.hypot(gx, gy) ** 3
        den = np.abs(pxx * gy**2 - 2 * pxy * gx * gy + pyy * gx**2)
        with np.errstate(divide="ignore"):
            return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.inf)

    def zero_set(self, xs, y_range):
        """Points ``(x, y)`` on ``Psi = 0`` for each ``x`` (one root per column)."""
        y0, y1 = y_range
        pts = []
        for x in np.atleast_1d(xs):
            f = lambda y: float(self.psi(x, y))
            if f(y0) * f(y1) > 0:
                continue
            pts.append((float(x), optimize.brentq(f, y0, y1, xtol=1e-14)))
        return np.array(pts).reshape(-1, 2)

    def mean_curvature_radius(self, x_range, y_range, samples: int = 101) -> float:
        """Average radius of curvature over the arc with ``x`` in ``x_range``."""
        arc = self.zero_set(np.linspace(*x_range, samples), y_range)
        if len(arc) == 0:
            raise OTMeshError("feature does not cross the requested window")
        return float(np.mean(self.curvature_radius(arc[:, 0], arc[:, 1])))


def sine_feature(amplitude: float = 0.2, phase: float = 0.5) -> FeatureCurve:
    """``Psi = y - amplitude sin(2 pi (x + phase))``."""
    k = 2 * np.pi

    def psi(x, y):
        return y - amplitude * np.sin(k * (x + phase))

    def grad(x, y):
        return -amplitude * k * np.cos(k * (x + phase)), np.ones_like(np.asarray(x + y, float))

    def hess(x, y):
        z = np.zeros_like(np.asarray(x + y, float))
        return amplitude * k * k * np.sin(k * (x + phase)), z, z

    return FeatureCurve(psi, grad, hess)


def feature_density(curve: FeatureCurve, alpha1: float, alpha2: float) -> DensityField:
    """``1 + alpha1 sech^2(alpha2 |Psi|)``."""
    return DensityField(lambda x, y: 1.0 + alpha1 * sech2(alpha2 * curve.psi(x, y)), None, None, "feature")


class LocalModelPrediction(NamedTuple):
    """Predicted Jacobian eigenpairs, labelled by direction."""

    lambda_normal: np.ndarray | float
    lambda_tangential: np.ndarray | float
    normal: np.ndarray
    tangent: np.ndarray
    kind: str
    region: tuple | None = None
    degenerate: np.ndarray | bool = False

    def metric_eigenvalues(self, theta: float):
        """``(mu_normal, mu_tangential) = theta / lambda^2``."""
        return theta / np.square(self.lambda_normal), theta / np.square(self.lambda_tangential)

    def jacobian(self) -> Jacobian2:
        n, t = np.asarray(self.normal), np.asarray(self.tangent)
        ln = np.asarray(self.lambda_normal)[..., None, None]
        lt = np.asarray(self.lambda_tangential)[..., None, None]
        m = ln * n[..., :, None] * n[..., None, :] + lt * t[..., :, None] * t[..., None, :]
        return Jacobian2.from_matrix(m)

    def metric(self, theta: float) -> MetricTensor2:
        mn, mt = self.metric_eigenvalues(theta)
        n, t = np.asarray(self.normal), np.asarray(self.tangent)
        m11 = mn * n[..., 0] ** 2 + mt * t[..., 0] ** 2
        m12 = mn * n[..., 0] * n[..., 1] + mt * t[..., 0] * t[..., 1]
        m22 = mn * n[..., 1] ** 2 + mt * t[..., 1] ** 2
        return MetricTensor2(m11, m12, m22, float(theta))


def _rot90(v):
    v = np.asarray(v)
    return np.stack([-v[..., 1], v[..., 0]], -1)


def linear_surrogate(rho, theta: float, x, curve: FeatureCurve, region=None) -> LocalModelPrediction:
    """Straight-feature prediction at physical point(s) ``x`` (last axis 2)."""
    x = np.asarray(x, dtype=float)
    px, py = x[..., 0], x[..., 1]
    n = curve.normal(px, py)
    r = np.asarray(rho(px, py), dtype=float)
    lam_n = theta / r
    lam_t = np.ones_like(lam_n)
    if np.ndim(lam_n) == 0:
        lam_n, lam_t = float(lam_n), 1.0
    return LocalModelPrediction(lam_n, lam_t, n, _rot90(n), "linear", region)


def radial_surrogate(rho_params, center, theta: float, x, region=None) -> LocalModelPrediction:
    """Ring-arc prediction from the exact radial map about ``center``.

    ``rho_params = (alpha1, alpha2, a)``; ``theta`` belongs to the original
    density and is used as given. The map radius ``r`` of the physical
    radius ``R = |x - center|`` solves ``F(R) = theta r^2``.
    """
    alpha1, alpha2, a = rho_params
    d = RadialDensity(alpha1, alpha2, a, r_star=None, R_star=None, theta=theta)
    x = np.asarray(x, dtype=float)
    rel = x - np.asarray(center, dtype=float)
    R = np.hypot(rel[..., 0], rel[..., 1])
    at_c = R == 0
    safe_R = np.where(at_c, 1.0, R)
    r = np.sqrt(d.F(R) / theta)
    core = np.sqrt(theta / d.rho(0.0))
    lam_t = np.where(at_c, core, R / np.where(at_c, 1.0, r))
    lam_n = np.where(at_c, core, theta / (d.rho(R) * lam_t))
    n = np.where(at_c[..., None], np.array([1.0, 0.0]), rel / safe_R[..., None])
    if np.ndim(R) == 0:
        return LocalModelPrediction(float(lam_n), float(lam_t), n, _rot90(n), "radial", region, bool(at_c))
    return LocalModelPrediction(lam_n, lam_t, n, _rot90(n), "radial", region, at_c)


@dataclass
class AlignmentReport:
    nodes: np.ndarray  # (k, 2) node indices in the band
    points: np.ndarray  # (k, 2) physical positions
    angle: np.ndarray  # eigenvector vs predicted normal, radians in [0, pi/4]
    lambda_normal: np.ndarray  # computed n^T J n
    lambda_tangential: np.ndarray  # computed t^T J t
    rel_error_normal: np.ndarray
    rel_error_tangential: np.ndarray
    near_boundary: np.ndarray  # within BOUNDARY_CELLS of a Neumann edge

    def select(self, mask) -> "AlignmentReport":
        return AlignmentReport(*(getattr(self, f)[mask] for f in self.__dataclass_fields__))

    @property
    def interior(self) -> "AlignmentReport":
        return self.select(~self.near_boundary)

    def aggregate_error(self) -> float:
        """Mean of the normal and tangential relative eigenvalue errors."""
        if len(self.angle) == 0:
            return float("nan")
        return float(np.mean(0.5 * (self.rel_error_normal + self.rel_error_tangential)))

    def summary(self) -> dict:
        return {
            "band_nodes": int(len(self.angle)),
            "near_boundary": int(self.near_boundary.sum()),
            "max_angle": float(self.angle.max()) if len(self.angle) else None,
            "mean_rel_error_normal": float(self.rel_error_normal.mean()) if len(self.angle) else None,
            "mean_rel_error_tangential": float(self.rel_error_tangential.mean()) if len(self.angle) else None,
        }


def alignment_diagnostics(
    mesh: MeshMapping,
    prediction: Callable[[np.ndarray], LocalModelPrediction],
    band: np.ndarray,
    jacobian: Jacobian2 | None = None,
) -> AlignmentReport:
    """Compare the mesh Jacobian with a local model on the band nodes.

    ``band`` is a boolean node mask (see :func:`feature_band`).
    ``prediction`` maps physical points (k, 2) to a
    :class:`LocalModelPrediction`. The angle is measured between the
    predicted normal and the nearest computed eigenvector (folded into
    ``[0, pi/4]``); eigenvalues are compared through the Rayleigh quotients
    of the computed Jacobian along the predicted directions.
    """
    mesh.check_untangled()
    band = np.asarray(band, dtype=bool)
    if not band.any():
        raise OTMeshError("empty feature band")
    jac = (jacobian or mesh.jacobian()).symmetrized()
    idx = np.argwhere(band)
    pts = np.column_stack([mesh.xs[band], mesh.ys[band]])
    pred = prediction(pts)
    J = Jacobian2(*(np.asarray(c)[band] for c in jac))
    eig = eig_sym2(J)
    n = np.asarray(pred.normal)
    t = np.asarray(pred.tangent)
    c = np.abs(np.sum(np.asarray(eig.e1) * n, -1))
    ang = np.arccos(np.clip(c, 0.0, 1.0))
    ang = np.minimum(ang, np.pi / 2 - ang)
    Jm = J.matrix()
    lam_n = np.einsum("ki,kij,kj->k", n, Jm, n)
    lam_t = np.einsum("ki,kij,kj->k", t, Jm, t)
    pn = np.broadcast_to(np.asarray(pred.lambda_normal, dtype=float), lam_n.shape)
    pt = np.broadcast_to(np.asarray(pred.lambda_tangential, dtype=float), lam_t.shape)
    near = np.zeros(len(idx), dtype=bool)
    g = mesh.grid
    if not g.periodic[0]:
        near |= (idx[:, 0] < BOUNDARY_CELLS) | (idx[:, 0] > g.nx - 1 - BOUNDARY_CELLS)
    if not g.periodic[1]:
        near |= (idx[:, 1] < BOUNDARY_CELLS) | (idx[:, 1] > g.ny - 1 - BOUNDARY_CELLS)
    return AlignmentReport(
        idx, pts, ang, lam_n, lam_t,
        np.abs(lam_n - pn) / np.abs(pn), np.abs(lam_t - pt) / np.abs(pt), near,
    )


def feature_band(mesh: MeshMapping, rho, alpha1: float) -> np.ndarray:
    """Nodes on the feature: ``rho > 1 + alpha1/2`` (the sech^2 half maximum)."""
    return np.asarray(rho(mesh.xs, mesh.ys)) > 1.0 + 0.5 * alpha1


# ---------------------------------------------------------------------------
# the sinusoidal-feature study


class FittedRegion(NamedTuple):
    name: str
    center: tuple[float, float]
    x_range: tuple[float, float]
    y_side: float  # +1: keep nodes above y_cut, -1: below
    y_cut: float

    def mask(self, pts) -> np.ndarray:
        pts = np.asarray(pts)
        inside = (pts[:, 0] > self.x_range[0]) & (pts[:, 0] < self.x_range[1])
        return inside & (self.y_side * (pts[:, 1] - self.y_cut) > 0)


def sine_regions(a: float = 0.25, amplitude: float = 0.2, half_width: float = 0.07, margin: float = 0.02):
    """Crest and trough windows of :func:`sine_feature` with ring centers ``a`` inside the bend."""
    return (
        FittedRegion("trough", (0.25, -amplitude + a), (0.25 - half_width, 0.25 + half_width), -1.0, -amplitude + margin),
        FittedRegion("crest", (-0.25, amplitude - a), (-0.25 - half_width, -0.25 + half_width), 1.0, amplitude - margin),
    )


@dataclass
class SineStudy:
    mesh: MeshMapping
    theta: float
    theta_quadrature: float | None
    iterations: int
    residual: float
    band: np.ndarray
    linear: AlignmentReport
    curvature_radius: np.ndarray  # at the band nodes
    near_linear: np.ndarray  # band-node mask
    regions: dict  # name -> (linear report, radial report) restricted to the region
    a: float

    def near_linear_report(self) -> AlignmentReport:
        return self.linear.select(self.near_linear & ~self.linear.near_boundary)

    def summary(self) -> dict:
        nl = self.near_linear_report()
        out = {
            "theta": self.theta,
            "theta_quadrature": self.theta_quadrature,
            "iterations": self.iterations,
            "residual": self.residual,
            "band_nodes": int(self.band.sum()),
            "near_linear_nodes": int(len(nl.angle)),
            "near_linear_max_angle": float(nl.angle.max()) if len(nl.angle) else None,
            "near_linear_max_rel_error_normal": float(nl.rel_error_normal.max()) if len(nl.angle) else None,
            "near_linear_max_rel_error_tangential": float(nl.rel_error_tangential.max()) if len(nl.angle) else None,
            "a": self.a,
        }
        for name, (lin, rad) in self.regions.items():
            out[f"{name}_nodes"] = int(len(lin.angle))
            out[f"{name}_linear_aggregate_error"] = lin.aggregate_error()
            out[f"{name}_radial_aggregate_error"] = rad.aggregate_error()
        return out


def sine_feature_study(alpha1: float = 20.0, alpha2: float = 100.0, n: int = 60, a: float = 0.25,
                       cfg=None, near_linear_radius: float | None = None) -> SineStudy:
    """Solve the mesh for the sinusoidal feature and compare it with both surrogates.

    The grid is ``(-1/2, 1/2)^2``, periodic in ``x`` and Neumann in ``y``.
    Band nodes whose curvature radius is at least ``near_linear_radius``
    (default ``100/alpha2``) count as near-linear.
    """
    from .geometry import Grid2D
    from .ma_solver import SolverConfig, solve_ma

    curve = sine_feature()
    rho = feature_density(curve, alpha1, alpha2)
    grid = Grid2D(n, n, (-0.5, 0.5, -0.5, 0.5), "periodic", "neumann")
    pf, mesh = solve_ma(rho, grid, cfg or SolverConfig())
    theta = pf.theta
    band = feature_band(mesh, rho, alpha1)
    lin = alignment_diagnostics(mesh, lambda p: linear_surrogate(rho, theta, p, curve), band)
    R = curve.curvature_radius(lin.points[:, 0], lin.points[:, 1])
    thr = 100.0 / alpha2 if near_linear_radius is None else near_linear_radius
    regions = {}
    for reg in sine_regions(a):
        m = reg.mask(lin.points)
        rad = alignment_diagnostics(mesh, lambda p, c=reg.center: radial_surrogate((alpha1, alpha2, a), c, theta, p), band)
        regions[reg.name] = (lin.select(m), rad.select(m))
    return SineStudy(mesh, theta, pf.info.theta_quadrature, pf.info.iterations, pf.info.residual,
                     band, lin, R, R >= thr, regions, a)
