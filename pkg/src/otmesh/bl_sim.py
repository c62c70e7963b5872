"""
Buckley-Leverett flow on a moving mesh driven by PMA.

The PDE is solved in computational coordinates in the moving-mesh form

    du/dt|_xi = -(f(u)_x + g(u)_y) + xdot . grad u + mu Lap u,

with the flux divergence written conservatively through the mesh metrics.
Each time step alternates a bounded PMA block (arc-length density
``sqrt(1 + |grad u|^2)``) with an explicit midpoint step of the PDE.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Callable, NamedTuple

import numpy as np

from .density import DensityField
from .errors import CFLError
from .geometry import Grid2D, MeshMapping, QualityReport, quality_report
from .ma_solver import PMARelaxation, SolverConfig

log = logging.getLogger(__name__)

MU = 1.1e-3
CFL = 0.4
DISC_CENTER = (0.5, 0.5)
DISC_RADIUS2 = 1.0 / 18.0


class FluxPair(NamedTuple):
    f: Callable
    g: Callable
    df: Callable
    dg: Callable


def flux_f(u):
    u = np.asarray(u, dtype=float)
    out = u * u / (3.0 * (u * u + (1.0 - u) ** 2))
    return float(out) if out.ndim == 0 else out


def flux_g(u):
    u = np.asarray(u, dtype=float)
    out = flux_f(u) * (1.0 - 5.0 * (1.0 - u) ** 2) / 3.0
    return float(out) if np.ndim(out) == 0 else out


def dflux_f(u):
    u = np.asarray(u, dtype=float)
    d = 2.0 * u * u - 2.0 * u + 1.0
    return 2.0 * u * (1.0 - u) / (3.0 * d * d)


def dflux_g(u):
    u = np.asarray(u, dtype=float)
    v = 1.0 - u
    return (dflux_f(u) * (1.0 - 5.0 * v * v) + 10.0 * flux_f(u) * v) / 3.0


BUCKLEY_LEVERETT = FluxPair(flux_f, flux_g, dflux_f, dflux_g)


@dataclass(frozen=True)
class BLConfig:
    n: int = 80
    mu: float = MU
    cfl: float = CFL
    pma: SolverConfig = field(default_factory=lambda: SolverConfig(dtau=0.02, smoothing=0.1))
    pma_steps: int = 20  # relaxation steps per time step
    smoothing_sweeps: int = 2
    adaptive: bool = True  # False freezes the mesh (rho = 1)
    initial_adapt_steps: int = 400
    initial_width_cells: float = 1.0
    flux: FluxPair = BUCKLEY_LEVERETT


@dataclass
class BLState:
    grid: Grid2D
    u: np.ndarray
    mesh: MeshMapping
    mesh_velocity: np.ndarray  # (2, nx, ny)
    t: float = 0.0
    phi: np.ndarray | None = None  # mesh potential perturbation (warm start)
    steps: int = 0
    report: QualityReport | None = None
    rho: np.ndarray | None = None

    def copy(self) -> "BLState":
        return replace(
            self,
            u=self.u.copy(),
            mesh=MeshMapping(self.grid, self.mesh.xs.copy(), self.mesh.ys.copy()),
            mesh_velocity=self.mesh_velocity.copy(),
            phi=None if self.phi is None else self.phi.copy(),
            rho=None if self.rho is None else self.rho.copy(),
        )


# ---------------------------------------------------------------------------
# stencils on padded arrays (two ghost layers)


def _pad_scalar(u):
    return np.pad(u, 2, mode="reflect")


def _pad_mesh(xs, ys):
    """Ghost nodes mirrored across the boundary lines of the unit square.

    The coordinate normal to a boundary is reflected oddly about it, the
    tangential one evenly, so ghost cells are mirror images of the interior.
    """
    ax0, ax1 = ((2, 2), (0, 0)), ((0, 0), (2, 2))
    X = np.pad(np.pad(xs, ax0, mode="reflect", reflect_type="odd"), ax1, mode="reflect")
    Y = np.pad(np.pad(ys, ax0, mode="reflect"), ax1, mode="reflect", reflect_type="odd")
    return X, Y


def _d_xi(a, h):
    return (a[2:, 1:-1] - a[:-2, 1:-1]) / (2 * h)


def _d_eta(a, h):
    return (a[1:-1, 2:] - a[1:-1, :-2]) / (2 * h)


class _Geometry(NamedTuple):
    x_xi: np.ndarray
    x_eta: np.ndarray
    y_xi: np.ndarray
    y_eta: np.ndarray
    J: np.ndarray  # all on the 1-ghost-layer padded grid


def _geometry(xs, ys, hx, hy) -> _Geometry:
    X, Y = _pad_mesh(xs, ys)
    x_xi, x_eta = _d_xi(X, hx), _d_eta(X, hy)
    y_xi, y_eta = _d_xi(Y, hx), _d_eta(Y, hy)
    J = x_xi * y_eta - x_eta * y_xi
    return _Geometry(x_xi, x_eta, y_xi, y_eta, J)


def physical_gradient(u, xs, ys, hx, hy):
    """``(u_x, u_y)`` at the nodes by the chain rule."""
    U = _pad_scalar(u)[1:-1, 1:-1]
    G = _geometry(xs, ys, hx, hy)
    u_xi, u_eta = _d_xi(U, hx), _d_eta(U, hy)
    c = (slice(1, -1), slice(1, -1))
    J = G.J[c]
    ux = (G.y_eta[c] * u_xi - G.y_xi[c] * u_eta) / J
    uy = (-G.x_eta[c] * u_xi + G.x_xi[c] * u_eta) / J
    return ux, uy


def rhs(u, xs, ys, vel, hx, hy, mu, flux: FluxPair):
    """Semi-discrete right-hand side at every node."""
    U = _pad_scalar(u)
    G = _geometry(xs, ys, hx, hy)
    Ui = U[1:-1, 1:-1]
    c = (slice(1, -1), slice(1, -1))
    J = G.J[c]

    # conservative flux divergence
    f = flux.f(Ui)
    g = flux.g(Ui)
    Fxi = G.y_eta * f - G.x_eta * g
    Feta = -G.y_xi * f + G.x_xi * g
    div = (_d_xi(Fxi, hx) + _d_eta(Feta, hy)) / J

    # gradient for the mesh-velocity term
    u_xi, u_eta = _d_xi(Ui, hx), _d_eta(Ui, hy)
    ux = (G.y_eta[c] * u_xi - G.y_xi[c] * u_eta) / J
    uy = (-G.x_eta[c] * u_xi + G.x_xi[c] * u_eta) / J
    adv = vel[0] * ux + vel[1] * uy

    # Laplacian: J Lap u = d_xi(A u_xi + B u_eta) + d_eta(B u_xi + C u_eta)
    A = (G.x_eta**2 + G.y_eta**2) / G.J
    B = -(G.x_xi * G.x_eta + G.y_xi * G.y_eta) / G.J
    C = (G.x_xi**2 + G.y_xi**2) / G.J
    # compact second differences for the A and C terms
    Ah = 0.5 * (A[1:, 1:-1] + A[:-1, 1:-1])
    Ch = 0.5 * (C[1:-1, 1:] + C[1:-1, :-1])
    du_x = (Ui[1:, 1:-1] - Ui[:-1, 1:-1]) / hx
    du_y = (Ui[1:-1, 1:] - Ui[1:-1, :-1]) / hy
    a_term = (Ah[1:] * du_x[1:] - Ah[:-1] * du_x[:-1]) / hx
    c_term = (Ch[:, 1:] * du_y[:, 1:] - Ch[:, :-1] * du_y[:, :-1]) / hy
    # cross terms with central differences on the one-ghost ring
    uxi_r = (U[2:, 1:-1] - U[:-2, 1:-1]) / (2 * hx)
    ueta_r = (U[1:-1, 2:] - U[1:-1, :-2]) / (2 * hy)
    b_term = _d_xi(B * ueta_r, hx) + _d_eta(B * uxi_r, hy)
    lap = (a_term + c_term + b_term) / J

    return -div + adv + mu * lap


# ---------------------------------------------------------------------------
# initial data and density


def _disc_profile(x, y, width):
    r = np.hypot(x - DISC_CENTER[0], y - DISC_CENTER[1])
    r0 = np.sqrt(DISC_RADIUS2)
    if width <= 0:
        return (r * r < DISC_RADIUS2).astype(float)
    return 0.5 * (1.0 - np.tanh((r - r0) / width))


def _disc_density(width):
    r0 = np.sqrt(DISC_RADIUS2)

    def rho(x, y):
        r = np.hypot(x - DISC_CENTER[0], y - DISC_CENTER[1])
        t = np.tanh((r - r0) / width)
        grad = 0.5 * (1.0 - t * t) / width
        return np.sqrt(1.0 + grad * grad)

    return DensityField(rho, None, None, "initial-front")


def initial_condition(grid: Grid2D | None = None, cfg: BLConfig = BLConfig(), smooth: bool = True) -> BLState:
    """Disc of ``u = 1`` of radius ``sqrt(1/18)`` about ``(0.5, 0.5)``.

    With ``smooth`` the jump is a tanh profile one cell wide. With
    ``cfg.adaptive`` the mesh is first relaxed toward the arc-length
    density of that profile and ``u`` is evaluated at the moved nodes.
    """
    grid = grid or Grid2D(cfg.n, cfg.n, (0.0, 1.0, 0.0, 1.0))
    if grid.domain != (0.0, 1.0, 0.0, 1.0) or any(grid.periodic):
        raise ValueError("the Buckley-Leverett problem lives on the unit square with Neumann edges")
    width = cfg.initial_width_cells * min(grid.spacing) if smooth else 0.0
    xi, eta = grid.nodes()
    phi = np.zeros(grid.shape)
    mesh = MeshMapping(grid, xi.copy(), eta.copy())
    if cfg.adaptive and cfg.initial_adapt_steps > 0:
        relax = PMARelaxation(grid, cfg.pma)
        rho = _disc_density(width if width > 0 else min(grid.spacing))
        phi, _, res, steps, _ = relax.relax(phi, rho, cfg.initial_adapt_steps, tolerance=cfg.pma.tolerance)
        log.info("initial adaptation: %d steps, residual %.3e", steps, res)
        mesh = _mesh_of(grid, phi)
    u = _disc_profile(mesh.xs, mesh.ys, width)
    return BLState(grid, u, mesh, np.zeros((2,) + grid.shape), 0.0, phi)


def _smooth(a, sweeps):
    for _ in range(sweeps):
        p = np.pad(a, 1, mode="reflect")
        a = 0.5 * a + 0.125 * (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2])
    return a


def density_from_solution(state: BLState, sweeps: int = 0) -> DensityField:
    """Arc-length density ``sqrt(1 + |grad u|^2)`` attached to the nodes.

    With ``sweeps > 0`` the field is low-pass filtered and divided by its
    mean, as fed to the mesh solver.
    """
    state.mesh.check_untangled()
    hx, hy = state.grid.spacing
    ux, uy = physical_gradient(state.u, state.mesh.xs, state.mesh.ys, hx, hy)
    rho = np.sqrt(1.0 + ux * ux + uy * uy)
    if sweeps > 0:
        rho = _smooth(rho, sweeps)
        rho = rho / rho.mean()
    return DensityField(lambda x, y: np.ones(np.shape(x)), None, rho, "arc-length")


def _mesh_of(grid, phi) -> MeshMapping:
    from .ma_solver import PotentialField, mesh_from_potential

    return mesh_from_potential(PotentialField.from_phi(grid, phi, 1.0))


def node_spacing(mesh: MeshMapping) -> np.ndarray:
    """Shortest edge from each node to its grid neighbours."""
    x, y = mesh.xs, mesh.ys
    big = np.inf
    out = np.full(x.shape, big)
    dx = np.hypot(np.diff(x, axis=0), np.diff(y, axis=0))
    dy = np.hypot(np.diff(x, axis=1), np.diff(y, axis=1))
    out[:-1] = np.minimum(out[:-1], dx)
    out[1:] = np.minimum(out[1:], dx)
    out[:, :-1] = np.minimum(out[:, :-1], dy)
    out[:, 1:] = np.minimum(out[:, 1:], dy)
    return out


def max_stable_dt(state: BLState, cfg: BLConfig = BLConfig(), velocity=None) -> float:
    """Largest dt allowed by the advective and diffusive limits on the current mesh."""
    h = node_spacing(state.mesh)
    vel = state.mesh_velocity if velocity is None else velocity
    speed = np.abs(cfg.flux.df(state.u)) + np.abs(cfg.flux.dg(state.u)) + np.hypot(vel[0], vel[1])
    adv = np.min(h / np.maximum(speed, 1e-12))
    diff = np.min(h) ** 2 / (4.0 * cfg.mu)
    return cfg.cfl * min(adv, diff)


def step(state: BLState, dt: float, cfg: BLConfig = BLConfig(), relax: PMARelaxation | None = None) -> BLState:
    """One alternation: PMA block, mesh velocity, midpoint step of the PDE.

    The mesh displacement of the block is scaled back (a convex combination
    of potentials, so still a valid mesh) when the mesh would outrun the
    advective CFL limit for this ``dt``.
    """
    grid = state.grid
    hx, hy = grid.spacing
    h_old = node_spacing(state.mesh)
    c = np.abs(cfg.flux.df(state.u)) + np.abs(cfg.flux.dg(state.u))
    dt_static = cfg.cfl * min(np.min(h_old / np.maximum(c, 1e-12)), np.min(h_old) ** 2 / (4.0 * cfg.mu))
    if dt > dt_static * (1 + 1e-12):
        raise CFLError(dt, dt_static)

    phi_old = state.phi if state.phi is not None else np.zeros(grid.shape)
    new_mesh = state.mesh
    phi_new = phi_old
    if cfg.adaptive:
        relax = relax or PMARelaxation(grid, cfg.pma)
        rho = density_from_solution(state, cfg.smoothing_sweeps)
        w = grid.weights()
        H = _hessian_det(grid, phi_old)
        theta = float(np.sum(w * rho.nodal * H) / np.sum(w))
        phi_blk, _, _, _, _ = relax.relax(phi_old, rho, cfg.pma_steps, frozen_theta=theta)
        cand = _mesh_of(grid, phi_blk)
        disp = np.hypot(cand.xs - state.mesh.xs, cand.ys - state.mesh.ys)
        room = cfg.cfl * h_old - dt * c
        over = disp > 0.5 * room
        s = 1.0
        if np.any(over):
            s = float(np.min(np.where(disp > 0, 0.5 * np.maximum(room, 0) / np.maximum(disp, 1e-300), np.inf)))
            s = min(max(s, 0.0), 1.0)
        phi_new = phi_old + s * (phi_blk - phi_old)
        new_mesh = cand if s == 1.0 else _mesh_of(grid, phi_new)
        new_mesh.check_untangled()
    vel = np.stack([(new_mesh.xs - state.mesh.xs) / dt, (new_mesh.ys - state.mesh.ys) / dt])
    dt_max = max_stable_dt(state, cfg, vel)
    if dt > dt_max * (1 + 1e-9):
        raise CFLError(dt, dt_max)

    xm = 0.5 * (state.mesh.xs + new_mesh.xs)
    ym = 0.5 * (state.mesh.ys + new_mesh.ys)
    k1 = rhs(state.u, xm, ym, vel, hx, hy, cfg.mu, cfg.flux)
    k2 = rhs(state.u + 0.5 * dt * k1, xm, ym, vel, hx, hy, cfg.mu, cfg.flux)
    u_new = state.u + dt * k2
    if not np.all(np.isfinite(u_new)):
        raise FloatingPointError(f"non-finite solution at t={state.t + dt:.4g}")
    return BLState(grid, u_new, new_mesh, vel, state.t + dt, phi_new, state.steps + 1)


def _hessian_det(grid, phi):
    from .ma_solver import _derivatives

    return _derivatives(phi, grid).hessian_det()


def finalize(state: BLState, cfg: BLConfig = BLConfig()) -> BLState:
    """Attach the arc-length density and a :class:`QualityReport` to a state."""
    rho = density_from_solution(state, 0)
    state.rho = rho.nodal
    state.report = quality_report(state.mesh, rho)
    return state


def run(
    end_time: float = 0.4,
    cfg: BLConfig = BLConfig(),
    snapshot_times=(),
    state: BLState | None = None,
    max_steps: int = 1_000_000,
    callback: Callable[[BLState], None] | None = None,
) -> list[BLState]:
    """Integrate to ``end_time`` with CFL-limited steps.

    Returns snapshots at each requested time (steps are shortened to land
    on them exactly) followed by the final state; every snapshot carries a
    :class:`QualityReport`.
    """
    if end_time < 0:
        raise ValueError("end_time must be >= 0")
    state = state or initial_condition(cfg=cfg)
    if end_time == 0:
        return [finalize(state.copy(), cfg)]
    targets = sorted(t for t in snapshot_times if state.t < t < end_time) + [end_time]
    relax = PMARelaxation(state.grid, cfg.pma) if cfg.adaptive else None
    out = []
    k = 0
    while targets and k < max_steps:
        dt = max_stable_dt(state, cfg)
        dt = min(dt, targets[0] - state.t)
        try:
            new = step(state, dt, cfg, relax)
        except CFLError as err:
            new = step(state, 0.9 * err.dt_max, cfg, relax)
        state = new
        k += 1
        if callback is not None:
            callback(state)
        if state.t >= targets[0] - 1e-12:
            state.t = targets.pop(0)
            out.append(finalize(state.copy(), cfg))
            log.info("t=%.4f after %d steps", state.t, state.steps)
    if targets:
        raise RuntimeError(f"step budget exhausted at t={state.t:.4g}")
    return out
