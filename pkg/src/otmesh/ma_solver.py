"""
Parabolic relaxation (PMA) for the Monge-Ampere mesh equation

    rho(grad P) H(P) = theta,   P(xi) = |xi|^2 / 2 + phi(xi),

on a rectangle with Neumann (``phi_n = 0``, boundary nodes slide along the
boundary) or periodic axes. Each step is

    phi <- phi + dtau * S[ sqrt(rho H / theta) - 1 ],   S = (I - gamma Lap)^{-1},

with ``S`` applied exactly in a cosine (Neumann) or Fourier (periodic) basis.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy import fft

from .density import DensityField
from .errors import ConvergenceError, ConvexityError, TangledMeshError
from .geometry import NEUMANN, PERIODIC, Grid2D, MeshMapping

log = logging.getLogger(__name__)

MAX_CONVEXITY_RETRIES = 20


@dataclass(frozen=True)
class SolverConfig:
    dtau: float = 0.02
    smoothing: float = 0.1
    tolerance: float = 1e-3
    max_iter: int = 20000
    bc_x: str | None = None  # None: take from the grid
    bc_y: str | None = None
    growth: float = 1.02  # dtau recovery factor after a reduction
    blowup_factor: float = 1.5  # halve dtau when the residual jumps by this much

    def __post_init__(self):
        if not (self.dtau > 0 and self.smoothing >= 0 and self.max_iter > 0):
            raise ValueError("dtau, max_iter must be positive and smoothing non-negative")
        if not (0 < self.tolerance < 1):
            raise ValueError(f"tolerance must lie in (0, 1), got {self.tolerance}")
        for bc in (self.bc_x, self.bc_y):
            if bc is not None and bc not in (NEUMANN, PERIODIC):
                raise ValueError(f"unknown boundary kind {bc!r}")


class SolveInfo(NamedTuple):
    iterations: int
    residual: float
    theta_quadrature: float | None
    history: np.ndarray


@dataclass
class PotentialField:
    """Mesh potential ``P`` on a grid; the mesh is ``grad P``."""

    grid: Grid2D
    p: np.ndarray
    theta: float
    info: SolveInfo | None = field(default=None, repr=False)

    @classmethod
    def identity(cls, grid: Grid2D, theta: float = 1.0) -> "PotentialField":
        xi, eta = grid.nodes()
        return cls(grid, 0.5 * (xi**2 + eta**2), theta)

    @classmethod
    def from_phi(cls, grid: Grid2D, phi: np.ndarray, theta: float) -> "PotentialField":
        xi, eta = grid.nodes()
        return cls(grid, 0.5 * (xi**2 + eta**2) + phi, theta)

    @property
    def phi(self) -> np.ndarray:
        xi, eta = self.grid.nodes()
        return self.p - 0.5 * (xi**2 + eta**2)

    def hessian_det(self) -> np.ndarray:
        d = _derivatives(self.phi, self.grid)
        return d.hessian_det()


class _Derivs(NamedTuple):
    px: np.ndarray
    py: np.ndarray
    pxx: np.ndarray
    pyy: np.ndarray
    pxy: np.ndarray

    def hessian_det(self):
        return (1.0 + self.pxx) * (1.0 + self.pyy) - self.pxy**2


def _pad(phi: np.ndarray, grid: Grid2D) -> np.ndarray:
    px, py = grid.periodic
    out = np.pad(phi, ((1, 1), (0, 0)), mode="wrap" if px else "reflect")
    return np.pad(out, ((0, 0), (1, 1)), mode="wrap" if py else "reflect")


def _derivatives(phi: np.ndarray, grid: Grid2D) -> _Derivs:
    hx, hy = grid.spacing
    p = _pad(phi, grid)
    c = p[1:-1, 1:-1]
    return _Derivs(
        (p[2:, 1:-1] - p[:-2, 1:-1]) / (2 * hx),
        (p[1:-1, 2:] - p[1:-1, :-2]) / (2 * hy),
        (p[2:, 1:-1] - 2 * c + p[:-2, 1:-1]) / hx**2,
        (p[1:-1, 2:] - 2 * c + p[1:-1, :-2]) / hy**2,
        (p[2:, 2:] - p[2:, :-2] - p[:-2, 2:] + p[:-2, :-2]) / (4 * hx * hy),
    )


class HelmholtzSmoother:
    """Exact inverse of ``I - gamma Lap_h`` with the grid's boundary conditions."""

    def __init__(self, grid: Grid2D, gamma: float):
        self.grid = grid
        self.gamma = gamma
        evs = []
        for n, h, per in zip(grid.shape, grid.spacing, grid.periodic):
            k = np.arange(n)
            if per:
                evs.append((2 * np.cos(2 * np.pi * k / n) - 2) / h**2)
            else:
                evs.append((2 * np.cos(np.pi * k / (n - 1)) - 2) / h**2)
        self.denominator = 1.0 - gamma * (evs[0][:, None] + evs[1][None, :])

    def __call__(self, f: np.ndarray) -> np.ndarray:
        if self.gamma == 0:
            return f
        per = self.grid.periodic
        F = np.asarray(f, dtype=float)
        for ax in (0, 1):
            F = fft.fft(F, axis=ax) if per[ax] else fft.dct(F, type=1, axis=ax)
        F = F / self.denominator
        for ax in (1, 0):
            F = fft.ifft(F, axis=ax) if per[ax] else fft.idct(F, type=1, axis=ax)
        return np.real(F)


def _grid_with_bc(grid: Grid2D, cfg: SolverConfig) -> Grid2D:
    bx = cfg.bc_x or grid.bc_x
    by = cfg.bc_y or grid.bc_y
    if (bx, by) == (grid.bc_x, grid.bc_y):
        return grid
    return Grid2D(grid.nx, grid.ny, grid.domain, bx, by)


class PMARelaxation:
    """Stateful relaxation loop, reusable across calls (warm starts).

    ``rho`` is either evaluated at the current physical nodes (a callable
    density) or, when ``DensityField.nodal`` is set, taken as attached to
    the computational nodes. ``theta`` is recomputed every step as the
    discrete integral of ``rho H`` unless ``frozen_theta`` is given.
    """

    def __init__(self, grid: Grid2D, cfg: SolverConfig = SolverConfig()):
        self.grid = _grid_with_bc(grid, cfg)
        self.cfg = cfg
        self.smoother = HelmholtzSmoother(self.grid, cfg.smoothing)
        self.xi, self.eta = self.grid.nodes()
        self.w = self.grid.weights()
        self.interior = self.grid.interior()
        self.dtau = cfg.dtau

    def evaluate(self, phi, rho: DensityField, frozen_theta=None):
        d = _derivatives(phi, self.grid)
        H = d.hessian_det()
        if rho.nodal is not None:
            r = np.asarray(rho.nodal, dtype=float)
        else:
            r = np.asarray(rho(self.xi + d.px, self.eta + d.py), dtype=float)
        theta = frozen_theta if frozen_theta is not None else float(np.sum(self.w * r * H) / np.sum(self.w))
        g = r * H / theta
        res = float(np.max(np.abs(g - 1.0)[self.interior]))
        return d, H, g, theta, res

    def relax(self, phi, rho: DensityField, max_steps: int, tolerance: float | None = None,
              frozen_theta: float | None = None, start_iteration: int = 0):
        """Run up to ``max_steps`` steps from ``phi``.

        Returns ``(phi, theta, residual, steps, history)``; stops early once
        the residual is below ``tolerance`` (when given).
        """
        phi = np.array(phi, dtype=float)
        d, H, g, theta, res = self.evaluate(phi, rho, frozen_theta)
        if H.min() <= 0:
            raise ConvexityError(start_iteration, H.min())
        history = [res]
        prev = res
        fails = 0
        steps = 0
        while steps < max_steps:
            if tolerance is not None and res < tolerance:
                break
            update = self.smoother(np.sqrt(np.maximum(g, 0.0)) - 1.0)
            trial = phi + self.dtau * update
            trial -= trial.mean()
            td, tH, tg, ttheta, tres = self.evaluate(trial, rho, frozen_theta)
            if not np.all(np.isfinite(tg)) or tH.min() <= 0:
                fails += 1
                self.dtau *= 0.5
                if fails > MAX_CONVEXITY_RETRIES:
                    raise ConvexityError(start_iteration + steps, tH.min())
                continue
            fails = 0
            phi, d, H, g, theta, res = trial, td, tH, tg, ttheta, tres
            steps += 1
            history.append(res)
            if res > self.cfg.blowup_factor * prev:
                self.dtau *= 0.5
            else:
                self.dtau = min(self.dtau * self.cfg.growth, self.cfg.dtau)
            prev = res
        return phi, theta, res, steps, np.asarray(history)


def solve_ma(
    rho: DensityField,
    grid: Grid2D,
    cfg: SolverConfig = SolverConfig(),
    p0: PotentialField | None = None,
    theta_quadrature: bool = True,
) -> tuple[PotentialField, MeshMapping]:
    """Relax to ``max |rho(grad P) H(P)/theta - 1| <= cfg.tolerance``.

    Starts from the identity map (or ``p0``). ``theta`` of the returned
    potential is the discrete normalization consistent with the residual;
    the quadrature value of ``int rho / |domain|`` is kept in ``info``.
    """
    relax = PMARelaxation(grid, cfg)
    g = relax.grid
    phi0 = np.zeros(g.shape) if p0 is None else p0.phi
    if rho.nodal is None:
        rho.check_positive(*g.nodes())
    phi, theta, res, steps, hist = relax.relax(phi0, rho, cfg.max_iter, cfg.tolerance)
    if res >= cfg.tolerance:
        raise ConvergenceError(steps, res, cfg.tolerance)
    thq = None
    if theta_quadrature and rho.nodal is None:
        thq = rho.mean_over(g.domain)
    log.info("PMA converged: %d iterations, residual %.3e, theta %.6f", steps, res, theta)
    pf = PotentialField.from_phi(g, phi, theta)
    pf.info = SolveInfo(steps, res, thq, hist)
    return pf, mesh_from_potential(pf)


def ma_residual(p: PotentialField, rho: DensityField) -> float:
    """``max |rho(grad P) H(P)/theta - 1|`` over interior nodes."""
    d = _derivatives(p.phi, p.grid)
    H = d.hessian_det()
    xi, eta = p.grid.nodes()
    if rho.nodal is not None:
        r = np.asarray(rho.nodal, dtype=float)
    else:
        r = np.asarray(rho(xi + d.px, eta + d.py), dtype=float)
    return float(np.max(np.abs(r * H / p.theta - 1.0)[p.grid.interior()]))


def mesh_from_potential(p: PotentialField) -> MeshMapping:
    """Central-difference gradient of ``P``.

    Neumann axes use the even reflection of ``phi``, which keeps boundary
    nodes on the boundary.
    """
    d = _derivatives(p.phi, p.grid)
    H = d.hessian_det()
    if np.any(H <= 0):
        node = np.unravel_index(np.argmin(H), H.shape)
        raise TangledMeshError(node, H[node])
    xi, eta = p.grid.nodes()
    return MeshMapping(p.grid, xi + d.px, eta + d.py)
