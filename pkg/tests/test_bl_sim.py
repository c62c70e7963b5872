import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otmesh.bl_sim import (
    BLConfig, BLState, density_from_solution, flux_f, flux_g, dflux_f, dflux_g, initial_condition,
    max_stable_dt, node_spacing, physical_gradient, run, step,
)
from otmesh.errors import CFLError, TangledMeshError
from otmesh.feature_analysis import LocalModelPrediction, alignment_diagnostics, radial_surrogate
from otmesh.geometry import Grid2D, MeshMapping

FIXED = BLConfig(n=40, adaptive=False)


def band_angles(state):
    """Eigenvector angle to the front normal on the rho band of a state."""
    rho = state.rho
    band = rho > 1 + 0.5 * (rho.max() - 1)
    hx, hy = state.grid.spacing
    ux, uy = physical_gradient(state.u, state.mesh.xs, state.mesh.ys, hx, hy)
    ux, uy = ux[band], uy[band]
    e1 = np.asarray(state.report.eigen.e1)[band]
    c = np.abs(ux * e1[:, 0] + uy * e1[:, 1]) / np.hypot(ux, uy)
    ang = np.arccos(np.clip(c, 0, 1))
    return np.minimum(ang, np.pi / 2 - ang)


def identity_state(u, n=21):
    g = Grid2D(n, n, (0.0, 1.0, 0.0, 1.0))
    xi, eta = g.nodes()
    return BLState(g, u(xi, eta), MeshMapping(g, xi, eta), np.zeros((2, n, n)))


# --- fluxes --------------------------------------------------------------------

def test_flux_values():
    assert flux_f(0.0) == 0.0 and flux_f(1.0) == pytest.approx(1 / 3)
    assert flux_f(0.5) == pytest.approx(1 / 6)
    assert flux_g(0.0) == 0.0 and flux_g(1.0) == pytest.approx(1 / 9)
    assert flux_g(1 - 1 / np.sqrt(5)) == pytest.approx(0.0, abs=1e-16)


@given(st.floats(-0.5, 1.5))
def test_flux_derivatives_match_finite_differences(u):
    h = 1e-6
    assert float(dflux_f(u)) == pytest.approx((flux_f(u + h) - flux_f(u - h)) / (2 * h), abs=1e-7)
    assert float(dflux_g(u)) == pytest.approx((flux_g(u + h) - flux_g(u - h)) / (2 * h), abs=1e-7)


# --- initial data and density --------------------------------------------------

def test_initial_condition_values():
    s = initial_condition(Grid2D(41, 41, (0.0, 1.0, 0.0, 1.0)), FIXED, smooth=False)
    assert s.u[20, 20] == 1.0 and s.u[0, 0] == 0.0
    assert set(np.unique(s.u)) == {0.0, 1.0}
    assert s.t == 0.0 and np.all(s.mesh_velocity == 0)


def test_initial_disc_area():
    g = Grid2D(801, 801, (0.0, 1.0, 0.0, 1.0))
    s = initial_condition(g, FIXED, smooth=False)
    assert np.sum(g.weights() * s.u) == pytest.approx(np.pi / 18, abs=1e-3)


def test_initial_condition_rejects_other_domains():
    with pytest.raises(ValueError):
        initial_condition(Grid2D(11, 11, (0.0, 2.0, 0.0, 1.0)))


def test_adapted_initial_mesh_concentrates_on_front():
    s = initial_condition(cfg=BLConfig(n=40))
    s.mesh.check_untangled()
    r = np.hypot(s.mesh.xs - 0.5, s.mesh.ys - 0.5)
    near = np.abs(r - np.sqrt(1 / 18)) < 0.03
    assert near.mean() > 2 * (0.06 * 2 * np.pi * np.sqrt(1 / 18))  # well above the uniform-mesh share
    assert 0.0 <= s.u.min() and s.u.max() <= 1.0


def test_density_examples():
    s = identity_state(lambda x, y: 0.3 + 0 * x)
    np.testing.assert_allclose(density_from_solution(s).nodal, 1.0)
    s = identity_state(lambda x, y: x)
    # boundary nodes see the zero-gradient reflection of u
    np.testing.assert_allclose(density_from_solution(s).nodal[1:-1], np.sqrt(2), rtol=1e-12)
    w = 0.1
    s = identity_state(lambda x, y: np.clip((x - 0.45) / w, 0, 1), n=201)
    assert density_from_solution(s).nodal.max() == pytest.approx(np.sqrt(1 + 1 / w**2), rel=1e-9)


def test_density_smoothed_is_mean_normalized():
    s = initial_condition(cfg=FIXED)
    rho = density_from_solution(s, 2).nodal
    assert rho.mean() == pytest.approx(1.0)
    assert np.all(density_from_solution(s).nodal >= 1.0)


def test_density_rejects_tangled_mesh():
    s = identity_state(lambda x, y: x)
    s.mesh = MeshMapping(s.grid, -s.mesh.xs, s.mesh.ys)
    with pytest.raises(TangledMeshError):
        density_from_solution(s)


# --- stepping -------------------------------------------------------------------

def _cartesian_rhs(u, h, mu):
    p = np.pad(u, 1, mode="reflect")
    f, g = flux_f(p), flux_g(p)
    adv = ((f[2:, 1:-1] - f[:-2, 1:-1]) + (g[1:-1, 2:] - g[1:-1, :-2])) / (2 * h)
    lap = (p[2:, 1:-1] + p[:-2, 1:-1] + p[1:-1, 2:] + p[1:-1, :-2] - 4 * u) / h**2
    return -adv + mu * lap


def test_frozen_mesh_matches_cartesian_scheme():
    s = initial_condition(cfg=FIXED)
    u = s.u.copy()
    h = s.grid.spacing[0]
    x0 = s.mesh.xs.copy()
    for _ in range(30):
        dt = max_stable_dt(s, FIXED)
        s = step(s, dt, FIXED)
        k1 = _cartesian_rhs(u, h, FIXED.mu)
        u = u + dt * _cartesian_rhs(u + 0.5 * dt * k1, h, FIXED.mu)
    assert np.max(np.abs(s.u - u)) <= 1e-12
    np.testing.assert_array_equal(s.mesh.xs, x0)
    assert np.all(s.mesh_velocity == 0)


def test_front_moves_with_flux():
    s0 = initial_condition(cfg=FIXED)
    s = s0
    for _ in range(20):
        s = step(s, max_stable_dt(s, FIXED), FIXED)
    du = s.u - s0.u
    xi, eta = s.grid.nodes()
    # f' > 0: mass moves toward larger x
    assert np.sum(du * (xi - 0.5)) > 0
    assert dflux_f(0.5) > 0 and dflux_g(0.9) > 0


def test_cfl_violation_raises_with_suggestion():
    s = initial_condition(cfg=FIXED)
    dt = max_stable_dt(s, FIXED)
    with pytest.raises(CFLError) as e:
        step(s, 10 * dt, FIXED)
    assert e.value.dt_max == pytest.approx(dt, rel=1e-9)
    assert "dt" in str(e.value)


def test_adaptive_step_keeps_mesh_valid():
    cfg = BLConfig(n=40)
    s = initial_condition(cfg=cfg)
    for _ in range(5):
        s = step(s, max_stable_dt(s, cfg), cfg)
        s.mesh.check_untangled()
    assert np.any(s.mesh_velocity != 0)
    assert max_stable_dt(s, cfg) > 0


def test_run_end_time_zero_returns_initial_state():
    s = initial_condition(cfg=FIXED)
    out = run(0.0, FIXED, state=s)
    assert len(out) == 1 and out[0].t == 0.0 and out[0].report is not None
    np.testing.assert_array_equal(out[0].u, s.u)
    with pytest.raises(ValueError):
        run(-1.0, FIXED, state=s)


def test_run_lands_on_snapshot_times():
    out = run(0.02, FIXED, snapshot_times=(0.01,))
    assert [s.t for s in out] == [0.01, 0.02]
    assert all(s.report is not None for s in out)


# --- the default 80x80 run to t = 0.4 ------------------------------------------------

@pytest.mark.slow
def test_default_run_completes(bl_run):
    final = bl_run["final"]
    assert final.t == 0.4 and final.grid.shape == (80, 80)
    assert bl_run["seconds"] < 30 * 60


@pytest.mark.slow
def test_default_run_never_tangles(bl_run):
    assert np.all(bl_run["min_det_per_step"] > 0)


@pytest.mark.slow
def test_default_run_saturation_bounds(bl_run):
    lo, hi = bl_run["u_bounds"]
    assert lo >= -0.05 and hi <= 1.05


@pytest.mark.slow
def test_default_run_front_is_resolved(bl_run):
    final = bl_run["final"]
    rho = final.rho
    assert rho.max() > 20  # thin front
    band = rho > 1 + 0.5 * (rho.max() - 1)
    assert np.median(node_spacing(final.mesh)[band]) < 0.5 / 79  # well below the uniform cell size


@pytest.mark.slow
def test_default_run_front_alignment(bl_run):
    ang = band_angles(bl_run["final"])
    assert len(ang) > 50
    assert np.mean(ang <= 0.15) >= 0.9


def _surrogate_errors(state):
    """Median normal-eigenvalue errors of the linear and fitted-ring surrogates on the band."""
    rho_s = density_from_solution(state, 2).nodal
    w = state.grid.weights()
    theta = float(np.sum(w * rho_s * state.report.jacobian.det()) / np.sum(w))
    band = state.rho > 1 + 0.5 * (state.rho.max() - 1)
    hx, hy = state.grid.spacing
    ux, uy = physical_gradient(state.u, state.mesh.xs, state.mesh.ys, hx, hy)
    norm = np.hypot(ux, uy)
    n = np.column_stack([ux[band] / norm[band], uy[band] / norm[band]])
    t = np.column_stack([-n[:, 1], n[:, 0]])
    lin = LocalModelPrediction(theta / rho_s[band], np.ones(band.sum()), n, t, "linear")
    r_lin = alignment_diagnostics(state.mesh, lambda p: lin, band)
    r_rad = alignment_diagnostics(
        state.mesh, lambda p: radial_surrogate((70.0, 500.0, 0.2), (0.62, 0.72), theta, p), band)
    return float(np.median(r_lin.rel_error_normal)), float(np.median(r_rad.rel_error_normal))


@pytest.mark.slow
def test_default_run_surrogates_within_25_percent(bl_run):
    lin, rad = _surrogate_errors(bl_run["final"])
    assert lin <= 0.25 and rad <= 0.25, f"linear {lin:.3f}, radial {rad:.3f}"
