import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from otmesh.analytic_linear import DIAGONAL, LinearMap, linear_eigenvalues, single_shock
from otmesh.analytic_radial import RadialMap, radial_eigenpairs, ring
from otmesh.density import DensityField
from otmesh.errors import DegenerateElementError, OTMeshError
from otmesh.feature_analysis import (
    FeatureCurve, alignment_diagnostics, feature_band, feature_density, linear_surrogate, radial_surrogate,
    sine_feature, sine_feature_study, sine_regions,
)
from otmesh.geometry import eig_sym2

CURVE = sine_feature()
RHO = feature_density(CURVE, 20.0, 100.0)


def line(c=0.0):
    return FeatureCurve(lambda x, y: y - c)


# --- curves -----------------------------------------------------------------

def test_sine_curve_geometry():
    assert CURVE.psi(0.25, -0.2) == pytest.approx(0.0, abs=1e-15)
    assert CURVE.curvature_radius(0.25, -0.2) == pytest.approx(1 / (0.2 * (2 * np.pi) ** 2))
    np.testing.assert_allclose(CURVE.normal(0.25, -0.2), [0.0, 1.0], atol=1e-15)
    assert CURVE.curvature_radius(0.0, 0.0) > 1e12  # inflection point


def test_finite_difference_derivatives_match_analytic():
    fd = FeatureCurve(CURVE.psi)
    x, y = 0.13, 0.05
    np.testing.assert_allclose(fd.gradient(x, y), CURVE.gradient(x, y), rtol=1e-8)
    assert fd.curvature_radius(x, y) == pytest.approx(float(CURVE.curvature_radius(x, y)), rel=1e-4)


def test_zero_gradient_raises():
    flat = FeatureCurve(lambda x, y: x * x + y * y)
    with pytest.raises(DegenerateElementError):
        flat.normal(0.0, 0.0)
    with pytest.raises(DegenerateElementError):
        linear_surrogate(DensityField.uniform(), 1.0, np.array([0.0, 0.0]), flat)


def test_curvature_estimator_on_trough():
    # mean level-set radius over the fitted window; smaller than the ring radius used for the study
    a = CURVE.mean_curvature_radius((0.18, 0.32), (-0.5, 0.5))
    assert a == pytest.approx(0.152, abs=1e-3)
    with pytest.raises(OTMeshError):
        CURVE.mean_curvature_radius((0.18, 0.32), (0.3, 0.5))


# --- linear surrogate ----------------------------------------------------------

def test_linear_surrogate_crest_example():
    p = linear_surrogate(RHO, 1.4, np.array([-0.25, 0.2]), CURVE)
    assert p.lambda_normal == pytest.approx(1.4 / 21, rel=1e-12)
    assert p.lambda_tangential == 1.0
    np.testing.assert_allclose(p.normal, [0.0, 1.0], atol=1e-15)


def test_linear_surrogate_isotropic_only_when_theta_one():
    rho = DensityField.uniform(1.4)
    assert linear_surrogate(rho, 1.4, np.array([0.1, 0.1]), line()).lambda_normal == pytest.approx(1.0)
    rho = DensityField.uniform(1.0)
    p = linear_surrogate(rho, 1.0, np.array([0.1, 0.1]), line())
    assert p.lambda_normal == p.lambda_tangential == 1.0


def test_straight_feature_reduces_to_linear_eigenvalues():
    d = single_shock(50.0)
    a, b = DIAGONAL
    curve = FeatureCurve(lambda x, y: a * x + b * y)
    theta = 3.0
    for pt in ([0.0, 0.0], [0.05, -0.02], [0.3, 0.1]):
        p = linear_surrogate(d, theta, np.array(pt), curve)
        ep = linear_eigenvalues(d, pt)
        assert p.lambda_normal == pytest.approx(ep.lambda1, rel=1e-5)
        assert p.lambda_tangential == pytest.approx(ep.lambda2, rel=1e-12)
        assert abs(np.dot(p.normal, ep.e1)) == pytest.approx(1.0, abs=1e-12)


@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5), st.floats(0.2, 5.0))
def test_linear_surrogate_metric_and_orthonormality(x, y, theta):
    p = linear_surrogate(RHO, theta, np.array([x, y]), CURVE)
    n, t = np.asarray(p.normal), np.asarray(p.tangent)
    assert abs(np.linalg.norm(n) - 1) < 1e-12 and abs(np.dot(n, t)) < 1e-12
    m = p.metric(theta)
    assert np.sqrt(m.det()) == pytest.approx(float(RHO(x, y)), rel=1e-10)
    assert np.sqrt(m.det()) * p.jacobian().det() == pytest.approx(theta, rel=1e-10)


# --- radial surrogate ------------------------------------------------------------

def test_radial_surrogate_matches_exact_radial_map():
    d = ring(20, 100, 0.25)
    m = RadialMap(d)
    xi = np.array([[0.1, 0.0], [0.2, 0.15], [-0.3, 0.1], [0.0, 0.45]])
    ep = radial_eigenpairs(m, xi)
    x = np.column_stack(m.map(xi[:, 0], xi[:, 1]))
    p = radial_surrogate((20, 100, 0.25), (0.0, 0.0), m.theta, x)
    np.testing.assert_allclose(p.lambda_normal, ep.lambda1, rtol=1e-8)
    np.testing.assert_allclose(p.lambda_tangential, ep.lambda2, rtol=1e-8)
    np.testing.assert_allclose(np.abs(np.sum(p.normal * ep.e1, -1)), 1.0, atol=1e-12)


def test_radial_surrogate_center_is_degenerate():
    p = radial_surrogate((20, 100, 0.25), (0.1, 0.2), 1.4, np.array([0.1, 0.2]))
    assert p.degenerate and p.lambda_normal == p.lambda_tangential
    many = radial_surrogate((20, 100, 0.25), (0.0, 0.0), 1.4, np.array([[0.0, 0.0], [0.1, 0.0]]))
    np.testing.assert_array_equal(many.degenerate, [True, False])


def test_radial_surrogate_uses_supplied_theta():
    x = np.array([0.25, 0.0])
    p1 = radial_surrogate((20, 100, 0.25), (0.0, 0.0), 1.4, x)
    p2 = radial_surrogate((20, 100, 0.25), (0.0, 0.0), 1.2, x)
    assert p1.lambda_tangential != p2.lambda_tangential
    lam_t = 0.25 / np.sqrt(ring(20, 100, 0.25, r_star=None, R_star=None, theta=1.4).F(0.25) / 1.4)
    assert p1.lambda_tangential == pytest.approx(lam_t)


@given(st.floats(0.01, 0.5), st.floats(0, 2 * np.pi))
def test_radial_surrogate_product_identity(R, t):
    theta = 1.4
    x = np.array([R * np.cos(t), R * np.sin(t)])
    p = radial_surrogate((20, 100, 0.25), (0.0, 0.0), theta, x)
    rho = 1 + 20 / np.cosh(100 * (R * R - 0.0625)) ** 2
    assert p.lambda_normal * p.lambda_tangential * rho == pytest.approx(theta, rel=1e-10)


# --- alignment diagnostics ---------------------------------------------------------

def test_self_consistency_on_exact_linear_mesh():
    lm = LinearMap(single_shock(50.0))
    mesh = lm.mesh(200)
    rho = lm.density_field()
    a, b = DIAGONAL
    curve = FeatureCurve(lambda x, y: a * x + b * y)
    band = feature_band(mesh, rho, 50.0)
    rep = alignment_diagnostics(mesh, lambda p: linear_surrogate(rho, lm.theta, p, curve), band)
    assert len(rep.angle) > 50
    assert rep.angle.max() <= 1e-3


def test_empty_band_raises():
    lm = LinearMap(single_shock(50.0))
    mesh = lm.mesh(20)
    with pytest.raises(OTMeshError, match="empty"):
        alignment_diagnostics(mesh, lambda p: None, np.zeros(mesh.grid.shape, bool))


def test_boundary_flags(sine_study):
    rep = sine_study.linear
    idx = rep.nodes[:, 1]
    n = sine_study.mesh.grid.ny
    expected = (idx < 3) | (idx > n - 4)  # Neumann in y only; x is periodic
    np.testing.assert_array_equal(rep.near_boundary, expected)


# --- the sinusoidal study ----------------------------------------------------------

def test_sine_regions_centers():
    trough, crest = sine_regions(0.25)
    assert trough.center == (0.25, pytest.approx(0.05)) and trough.x_range == pytest.approx((0.18, 0.32))
    assert crest.center == (-0.25, pytest.approx(-0.05))
    pts = np.array([[0.25, -0.2], [0.25, 0.0], [-0.25, 0.2]])
    np.testing.assert_array_equal(trough.mask(pts), [True, False, False])
    np.testing.assert_array_equal(crest.mask(pts), [False, False, True])


def test_sine_study_theta(sine_study):
    assert sine_study.theta_quadrature == pytest.approx(1.4, abs=5e-3)
    assert sine_study.residual < 1e-3


def test_curvature_invariant_alignment(sine_study):
    # band nodes with curvature radius above 5/(alpha2 a), at least 3 cells from the boundary
    thr = 5.0 / (100.0 * sine_study.a)
    rep = sine_study.linear
    keep = (sine_study.curvature_radius > thr) & ~rep.near_boundary
    assert keep.sum() > 20
    assert rep.angle[keep].max() <= 0.1


def test_radial_beats_linear_in_curved_regions(sine_study):
    for name, (lin, rad) in sine_study.regions.items():
        assert len(lin.angle) > 5, name
        assert rad.aggregate_error() < lin.aggregate_error()


def test_strong_feature_qualitative():
    study = sine_feature_study(50.0, 50.0, 60, 0.25)
    nl = study.near_linear_report()
    assert len(nl.angle) > 10
    assert np.mean(0.5 * (nl.rel_error_normal + nl.rel_error_tangential)) < 0.1
    for lin, rad in study.regions.values():
        assert rad.aggregate_error() < lin.aggregate_error()


def test_eigenvector_angle_is_folded(sine_study):
    rep = sine_study.linear
    assert np.all((rep.angle >= 0) & (rep.angle <= np.pi / 4 + 1e-12))
    j = sine_study.mesh.jacobian().symmetrized()
    e = eig_sym2(type(j)(*(np.asarray(c)[tuple(rep.nodes[0])] for c in j)))
    n = linear_surrogate(RHO, sine_study.theta, rep.points[0], CURVE).normal
    ang = np.arccos(min(1.0, abs(float(np.dot(e.e1, n)))))
    assert min(ang, np.pi / 2 - ang) == pytest.approx(rep.angle[0], abs=1e-12)
