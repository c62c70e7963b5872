"""
Mesh maps on structured grids and the local geometry of their Jacobians.

Conventions
-----------
- Node arrays have shape ``(nx, ny)`` and are indexed ``[i, j]`` with ``i``
  running along the first computational coordinate (xi) and ``j`` along the
  second (eta).
- A Jacobian is ``[[x_xi, x_eta], [y_xi, y_eta]]``.
- The small 2x2 types (:class:`Jacobian2`, :class:`EigenPair2`,
  :class:`MetricTensor2`) hold either scalars or equally shaped arrays, so
  every operation here works per node or on a whole field at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateElementError, TangledMeshError

PERIODIC = "periodic"
NEUMANN = "neumann"
_BC_KINDS = (PERIODIC, NEUMANN)

DEGENERATE_RTOL = 1e-10


@dataclass(frozen=True)
class Grid2D:
    """Uniform computational grid on an axis-aligned rectangle.

    On a periodic axis the last node is *not* duplicated: nodes sit at
    ``x0 + k * (x1 - x0) / n`` for ``k < n``. On a Neumann axis both end
    points are nodes.
    """

    nx: int
    ny: int
    domain: tuple[float, float, float, float] = (0.0, 1.0, 0.0, 1.0)
    bc_x: str = NEUMANN
    bc_y: str = NEUMANN

    def __post_init__(self):
        if self.nx < 3 or self.ny < 3:
            raise ValueError(f"grid needs at least 3 nodes per axis, got {self.nx}x{self.ny}")
        x0, x1, y0, y1 = self.domain
        if not (x1 > x0 and y1 > y0):
            raise ValueError(f"empty domain {self.domain}")
        for bc in (self.bc_x, self.bc_y):
            if bc not in _BC_KINDS:
                raise ValueError(f"unknown boundary kind {bc!r}; expected one of {_BC_KINDS}")
        object.__setattr__(self, "domain", tuple(float(v) for v in self.domain))

    @classmethod
    def square(cls, n: int, domain=(-0.5, 0.5, -0.5, 0.5), bc: str = NEUMANN) -> "Grid2D":
        return cls(n, n, domain, bc, bc)

    @property
    def lengths(self) -> tuple[float, float]:
        x0, x1, y0, y1 = self.domain
        return x1 - x0, y1 - y0

    @property
    def periodic(self) -> tuple[bool, bool]:
        return self.bc_x == PERIODIC, self.bc_y == PERIODIC

    @property
    def shape(self) -> tuple[int, int]:
        return self.nx, self.ny

    @property
    def spacing(self) -> tuple[float, float]:
        lx, ly = self.lengths
        px, py = self.periodic
        return lx / (self.nx if px else self.nx - 1), ly / (self.ny if py else self.ny - 1)

    def axes(self) -> tuple[np.ndarray, np.ndarray]:
        x0, _, y0, _ = self.domain
        hx, hy = self.spacing
        return x0 + hx * np.arange(self.nx), y0 + hy * np.arange(self.ny)

    def nodes(self) -> tuple[np.ndarray, np.ndarray]:
        """Computational coordinates ``(xi, eta)`` of every node."""
        ax, ay = self.axes()
        return np.meshgrid(ax, ay, indexing="ij")

    def weights(self) -> np.ndarray:
        """Trapezoidal quadrature weights (sum equals the domain area)."""
        hx, hy = self.spacing
        wx = np.full(self.nx, hx)
        wy = np.full(self.ny, hy)
        if not self.periodic[0]:
            wx[[0, -1]] *= 0.5
        if not self.periodic[1]:
            wy[[0, -1]] *= 0.5
        return wx[:, None] * wy[None, :]

    def interior(self) -> np.ndarray:
        """Boolean mask of nodes not lying on a Neumann boundary."""
        mask = np.ones(self.shape, dtype=bool)
        if not self.periodic[0]:
            mask[[0, -1], :] = False
        if not self.periodic[1]:
            mask[:, [0, -1]] = False
        return mask


@dataclass
class MeshMapping:
    """Physical node positions ``x(xi)`` over a computational :class:`Grid2D`."""

    grid: Grid2D
    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        self.xs = np.asarray(self.xs, dtype=float)
        self.ys = np.asarray(self.ys, dtype=float)
        if self.xs.shape != self.grid.shape or self.ys.shape != self.grid.shape:
            raise ValueError(
                f"node arrays {self.xs.shape}/{self.ys.shape} do not match grid {self.grid.shape}"
            )

    @classmethod
    def identity(cls, grid: Grid2D) -> "MeshMapping":
        xi, eta = grid.nodes()
        return cls(grid, xi.copy(), eta.copy())

    def jacobian(self) -> "Jacobian2":
        return discrete_jacobian(self)

    def check_untangled(self) -> np.ndarray:
        """Return det J per node, raising :class:`TangledMeshError` if any is <= 0."""
        det = self.jacobian().det()
        bad = det <= 0.0
        if np.any(bad):
            node = np.unravel_index(np.argmin(det), det.shape)
            raise TangledMeshError(node, det[node])
        return det


class Jacobian2(NamedTuple):
    a11: np.ndarray | float
    a12: np.ndarray | float
    a21: np.ndarray | float
    a22: np.ndarray | float

    @classmethod
    def from_matrix(cls, m) -> "Jacobian2":
        m = np.asarray(m, dtype=float)
        return cls(m[..., 0, 0], m[..., 0, 1], m[..., 1, 0], m[..., 1, 1])

    def det(self):
        return self.a11 * self.a22 - self.a12 * self.a21

    def matrix(self) -> np.ndarray:
        return np.stack(
            [np.stack([self.a11, self.a12], -1), np.stack([self.a21, self.a22], -1)], -2
        )

    def symmetrized(self) -> "Jacobian2":
        off = 0.5 * (np.asarray(self.a12) + np.asarray(self.a21))
        return Jacobian2(self.a11, off, off, self.a22)

    def asymmetry(self):
        return np.abs(np.asarray(self.a12) - np.asarray(self.a21))


class EigenPair2(NamedTuple):
    """Eigenvalues and unit eigenvectors (last axis of length 2).

    ``eig_sym2`` orders by descending ``|lambda|``; the analytic models in
    :mod:`otmesh.analytic_linear` and :mod:`otmesh.analytic_radial` instead
    label the pair by direction (feature-normal/radial first).
    """

    lambda1: np.ndarray | float
    lambda2: np.ndarray | float
    e1: np.ndarray
    e2: np.ndarray
    degenerate: np.ndarray | bool = False

    def matrix(self) -> np.ndarray:
        e1 = np.asarray(self.e1)
        e2 = np.asarray(self.e2)
        l1 = np.asarray(self.lambda1)[..., None, None]
        l2 = np.asarray(self.lambda2)[..., None, None]
        return l1 * e1[..., :, None] * e1[..., None, :] + l2 * e2[..., :, None] * e2[..., None, :]


class MetricTensor2(NamedTuple):
    m11: np.ndarray | float
    m12: np.ndarray | float
    m22: np.ndarray | float
    theta: float = 1.0

    def det(self):
        return self.m11 * self.m22 - self.m12**2

    def matrix(self) -> np.ndarray:
        return np.stack(
            [np.stack([self.m11, self.m12], -1), np.stack([self.m12, self.m22], -1)], -2
        )

    def is_spd(self):
        return (np.asarray(self.m11) > 0) & (np.asarray(self.det()) > 0)


# ---------------------------------------------------------------------------
# finite differences


def _axis_derivative(a: np.ndarray, axis: int, h: float, periodic: bool, jump: float) -> np.ndarray:
    """Second-order derivative along ``axis``.

    Periodic axes wrap around with ``jump`` added across the seam (the image
    period of the mapped coordinate); Neumann axes use one-sided second-order
    stencils on the two boundary lines.
    """
    if not periodic:
        return np.gradient(a, h, axis=axis, edge_order=2)
    fwd = np.roll(a, -1, axis=axis)
    bwd = np.roll(a, 1, axis=axis)
    d = fwd - bwd
    first = [slice(None)] * a.ndim
    last = [slice(None)] * a.ndim
    first[axis] = 0
    last[axis] = -1
    d[tuple(first)] += jump
    d[tuple(last)] += jump
    return d / (2.0 * h)


def discrete_jacobian(mesh: MeshMapping, node=None) -> Jacobian2:
    """Central-difference Jacobian of a mesh map.

    Returns a field-valued :class:`Jacobian2` or, when ``node=(i, j)`` is
    given, the scalar Jacobian at that node.
    """
    g = mesh.grid
    hx, hy = g.spacing
    px, py = g.periodic
    lx, ly = g.lengths
    a11 = _axis_derivative(mesh.xs, 0, hx, px, lx)
    a12 = _axis_derivative(mesh.xs, 1, hy, py, 0.0)
    a21 = _axis_derivative(mesh.ys, 0, hx, px, 0.0)
    a22 = _axis_derivative(mesh.ys, 1, hy, py, ly)
    jac = Jacobian2(a11, a12, a21, a22)
    if node is None:
        return jac
    i, j = node
    return Jacobian2(*(float(c[i, j]) for c in jac))


# ---------------------------------------------------------------------------
# pointwise 2x2 algebra


def _canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip vectors so the first component is >= 0 (second >= 0 on ties)."""
    flip = (v[..., 0] < 0) | ((np.abs(v[..., 0]) <= 1e-15) & (v[..., 1] < 0))
    return np.where(flip[..., None], -v, v)


def eig_sym2(j: Jacobian2) -> EigenPair2:
    """Closed-form eigendecomposition of the symmetric part of ``j``.

    Eigenvalues are ordered by descending magnitude (the positive one first
    on exact ties). Nearly repeated eigenvalues set ``degenerate``; the
    vectors are then an arbitrary orthonormal pair that still reconstructs
    the symmetric part.
    """
    s = j.symmetrized()
    a = np.asarray(s.a11, dtype=float)
    b = np.asarray(s.a12, dtype=float)
    c = np.asarray(s.a22, dtype=float)
    mean = 0.5 * (a + c)
    rad = np.hypot(0.5 * (a - c), b)
    lam_hi = mean + rad
    lam_lo = mean - rad
    phi = 0.5 * np.arctan2(2.0 * b, a - c)
    v_hi = np.stack([np.cos(phi), np.sin(phi)], -1)
    v_lo = np.stack([-np.sin(phi), np.cos(phi)], -1)

    hi_first = mean >= 0
    l1 = np.where(hi_first, lam_hi, lam_lo)
    l2 = np.where(hi_first, lam_lo, lam_hi)
    e1 = np.where(hi_first[..., None], v_hi, v_lo)
    e2 = np.where(hi_first[..., None], v_lo, v_hi)

    scale = np.maximum(np.abs(l1), np.abs(l2))
    degenerate = (l1 - l2 == 0) | (np.abs(l1 - l2) <= DEGENERATE_RTOL * scale)
    e1 = _canonical_sign(e1)
    e2 = _canonical_sign(e2)
    if np.ndim(l1) == 0:
        return EigenPair2(float(l1), float(l2), e1, e2, bool(degenerate))
    return EigenPair2(l1, l2, e1, e2, degenerate)


def _require_nonsingular(det, what="Jacobian"):
    det = np.asarray(det)
    if np.any(det == 0) or not np.all(np.isfinite(det)):
        raise DegenerateElementError(f"degenerate element: singular {what}")


def skewness(j: Jacobian2):
    """``Q_s = tr(J^T J) / (2 det(J^T J)^{1/2})``; equals 1 for conformal ``j``."""
    det = np.asarray(j.det(), dtype=float)
    _require_nonsingular(det)
    frob = np.square(j.a11) + np.square(j.a12) + np.square(j.a21) + np.square(j.a22)
    q = frob / (2.0 * np.abs(det))
    return float(q) if np.ndim(q) == 0 else q


def alignment_measure(j: Jacobian2, m: MetricTensor2):
    """``Q_a = tr(J^T M J) / (2 det(J^T M J)^{1/2})``; 1 iff M-uniform at the node."""
    detj = np.asarray(j.det(), dtype=float)
    _require_nonsingular(detj)
    detm = np.asarray(m.det(), dtype=float)
    if np.any(detm <= 0) or np.any(np.asarray(m.m11) <= 0):
        raise DegenerateElementError("metric tensor is not positive definite")
    a11, a12, a21, a22 = (np.asarray(c, dtype=float) for c in j)
    m11, m12, m22 = (np.asarray(c, dtype=float) for c in m[:3])
    # columns of J weighted by M; only the diagonal and the symmetrized
    # off-diagonal of J^T M J enter the trace and determinant
    t11 = m11 * a11 * a11 + 2 * m12 * a11 * a21 + m22 * a21 * a21
    t22 = m11 * a12 * a12 + 2 * m12 * a12 * a22 + m22 * a22 * a22
    t12 = m11 * a11 * a12 + m12 * (a11 * a22 + a21 * a12) + m22 * a21 * a22
    det = t11 * t22 - t12 * t12
    det = np.maximum(det, detj**2 * detm * (1 - 1e-15))
    q = (t11 + t22) / (2.0 * np.sqrt(det))
    return float(q) if np.ndim(q) == 0 else q


def metric_from_jacobian(j: Jacobian2, theta: float) -> MetricTensor2:
    """Metric tensor ``theta * sum_i lambda_i^{-2} e_i e_i^T`` of a symmetric Jacobian.

    The input is symmetrized first, so for a (nearly) symmetric potential
    Jacobian this is ``theta * J^{-T} J^{-1}``.
    """
    ep = eig_sym2(j)
    l1 = np.asarray(ep.lambda1, dtype=float)
    l2 = np.asarray(ep.lambda2, dtype=float)
    _require_nonsingular(l1 * l2)
    e1 = np.asarray(ep.e1)
    e2 = np.asarray(ep.e2)
    w1 = theta / l1**2
    w2 = theta / l2**2
    m11 = w1 * e1[..., 0] ** 2 + w2 * e2[..., 0] ** 2
    m12 = w1 * e1[..., 0] * e1[..., 1] + w2 * e2[..., 0] * e2[..., 1]
    m22 = w1 * e1[..., 1] ** 2 + w2 * e2[..., 1] ** 2
    if np.ndim(m11) == 0:
        return MetricTensor2(float(m11), float(m12), float(m22), float(theta))
    return MetricTensor2(m11, m12, m22, float(theta))


# ---------------------------------------------------------------------------
# whole-mesh diagnostics


@dataclass
class QualityReport:
    mesh: MeshMapping
    jacobian: Jacobian2
    eigen: EigenPair2
    metric: MetricTensor2
    qs: np.ndarray
    qa: np.ndarray
    residual: np.ndarray
    theta: float
    _interp: dict = field(default_factory=dict, repr=False)

    @property
    def max_qs(self) -> float:
        return float(self.qs.max())

    @property
    def mean_qs(self) -> float:
        return float(self.qs.mean())

    @property
    def argmax_qs(self) -> tuple[int, int]:
        return tuple(int(k) for k in np.unravel_index(np.argmax(self.qs), self.qs.shape))

    @property
    def max_qs_location(self) -> tuple[float, float]:
        i, j = self.argmax_qs
        return float(self.mesh.xs[i, j]), float(self.mesh.ys[i, j])

    @property
    def max_residual(self) -> float:
        return float(np.max(self.residual[self.mesh.grid.interior()]))

    def sample(self, points, name: str = "qs") -> np.ndarray:
        """Piecewise-linear interpolation of a nodal field at physical points.

        Uses a Delaunay triangulation of the physical node positions, so the
        sample is independent of the grid indexing.
        """
        from scipy.interpolate import LinearNDInterpolator

        if name not in self._interp:
            pts = np.column_stack([self.mesh.xs.ravel(), self.mesh.ys.ravel()])
            self._interp[name] = LinearNDInterpolator(pts, np.asarray(getattr(self, name)).ravel())
        return self._interp[name](np.atleast_2d(np.asarray(points, dtype=float)))

    def summary(self) -> dict:
        return {
            "theta": self.theta,
            "max_qs": self.max_qs,
            "mean_qs": self.mean_qs,
            "max_qs_node": list(self.argmax_qs),
            "max_qs_location": list(self.max_qs_location),
            "max_residual": self.max_residual,
        }


def quality_report(mesh: MeshMapping, rho=None, theta: float | None = None) -> QualityReport:
    """Per-node Jacobian, eigenpairs, metric, skewness, alignment and residual.

    ``rho`` is a :class:`~otmesh.density.DensityField` (or any callable
    ``rho(x, y)``); without it the uniform density is used. ``theta``
    defaults to ``rho.theta`` when set, otherwise to the discrete integral of
    ``rho(x) J`` over the computational grid.
    """
    det = mesh.check_untangled()
    jac = mesh.jacobian()
    grid = mesh.grid
    if rho is None:
        rvals = np.ones(grid.shape)
    elif getattr(rho, "nodal", None) is not None:
        rvals = np.asarray(rho.nodal, dtype=float)
    else:
        rvals = np.asarray(rho(mesh.xs, mesh.ys), dtype=float)
    if theta is None:
        theta = getattr(rho, "theta", None)
    if theta is None:
        w = grid.weights()
        theta = float(np.sum(w * rvals * det) / np.sum(w))
    eig = eig_sym2(jac)
    metric = metric_from_jacobian(jac, theta)
    qs = skewness(jac)
    qa = alignment_measure(jac, metric)
    residual = np.abs(rvals * det / theta - 1.0)
    return QualityReport(mesh, jac, eig, metric, qs, qa, residual, float(theta))


class Ellipse(NamedTuple):
    center: tuple[float, float]
    semi_axes: tuple[float, float]
    angle: float  # orientation of the first semi-axis, radians from the x axis


def ellipse_field(report: QualityReport, stride: int = 1) -> list[Ellipse]:
    """Circumscribed ellipses of the mesh elements at every ``stride``-th node.

    Semi-axes are ``|lambda_i|`` along ``e_i`` scaled by the computational
    spacing, so they are directly comparable to element sizes.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    hx, hy = report.mesh.grid.spacing
    h = np.sqrt(hx * hy)
    ep = report.eigen
    out = []
    nx, ny = report.mesh.grid.shape
    for i in range(0, nx, stride):
        for j in range(0, ny, stride):
            e1 = ep.e1[i, j]
            out.append(
                Ellipse(
                    (float(report.mesh.xs[i, j]), float(report.mesh.ys[i, j])),
                    (float(abs(ep.lambda1[i, j]) * h), float(abs(ep.lambda2[i, j]) * h)),
                    float(np.arctan2(e1[1], e1[0])),
                )
            )
    return out


def ellipse_of(j: Jacobian2, center=(0.0, 0.0), scale: float = 1.0) -> Ellipse:
    """Ellipse of a single Jacobian (the image of a circle of radius ``scale``)."""
    ep = eig_sym2(j)
    e1 = np.asarray(ep.e1)
    return Ellipse(
        (float(center[0]), float(center[1])),
        (float(abs(ep.lambda1) * scale), float(abs(ep.lambda2) * scale)),
        float(np.arctan2(e1[1], e1[0])),
    )
