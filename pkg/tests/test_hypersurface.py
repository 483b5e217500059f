import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doubling.errors import DegenerateSurfaceError, DomainError, ScenarioError
from doubling.hypersurface import (
    build_surface,
    covariant_derivative,
    cylinder,
    ellipsoid,
    foot_point,
    gauss_residual,
    geodesic_normal_field,
    mean_curvature,
    mean_curvature_area_oracle,
    normal_vector,
    parallel_shape,
    plane,
    shape_operator,
    sphere,
    unit_normal,
)
from doubling.metrics import conformal_metric, flat_metric, random_polynomial_terms


@pytest.fixture(scope="module")
def bumpy():
    return conformal_metric(3, random_polynomial_terms(3, seed=7, amplitude=0.05))


def _on_sphere(R, direction):
    d = np.asarray(direction, float)
    return R * d / np.linalg.norm(d)


@pytest.mark.parametrize("n", [3, 4])
@pytest.mark.parametrize("R", [0.5, 1.0, 2.0])
def test_sphere_mean_curvature(n, R):
    x = _on_sphere(R, np.arange(1.0, n + 1))
    frame = shape_operator(flat_metric(n, extent=4.0), sphere(np.zeros(n), R), x)
    assert np.allclose(frame.principal, 1 / R, atol=1e-12)
    assert frame.mean == pytest.approx((n - 1) / R, rel=1e-12)


def test_inward_orientation_flips_sign():
    x = _on_sphere(1.0, [1, 1, 1])
    assert mean_curvature(flat_metric(3), sphere(np.zeros(3), 1.0, outward=-1), x) == pytest.approx(-2.0)


def test_plane_and_cylinder_principal_curvatures():
    g = flat_metric(3)
    assert np.allclose(shape_operator(g, plane([1, 0, 0], 0.2), [0.2, 0.3, -0.1]).principal, 0)
    mu = shape_operator(g, cylinder(np.zeros(3), 0.5, axis=2), [0.3, 0.4, 0.7]).principal
    assert np.allclose(mu, [0.0, 2.0], atol=1e-12)


def test_ellipsoid_vertex_curvatures():
    a, b, c = 1.0, 2.0, 3.0
    mu = shape_operator(flat_metric(3), ellipsoid(np.zeros(3), [a, b, c]), [a, 0, 0]).principal
    assert np.allclose(np.sort(mu), np.sort([a / b**2, a / c**2]), atol=1e-12)


def test_mean_curvature_agrees_with_area_oracle(bumpy):
    surf = sphere(np.zeros(3), 1.0)
    for d in ([1, 0.2, 0.1], [-0.3, 1, 0.5], [0.2, -0.4, -1]):
        x = _on_sphere(1.0, d)
        assert mean_curvature_area_oracle(bumpy, surf, x) == pytest.approx(
            mean_curvature(bumpy, surf, x), rel=1e-6)


def test_unit_normal_has_unit_length(bumpy):
    x = _on_sphere(1.0, [0.3, 0.5, 0.8])
    nu = unit_normal(bumpy, sphere(np.zeros(3), 1.0), x)
    assert nu @ bumpy(x) @ nu == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("surf", [
    sphere(np.zeros(3), 1.0),
    cylinder(np.zeros(3), 0.8, axis=1),
    ellipsoid(np.zeros(3), [1.0, 1.3, 0.7]),
])
def test_gauss_equation_residual_is_small(bumpy, surf):
    x = np.array([0.5, 0.3, 0.4])
    q = foot_point(flat_metric(3), surf, x).foot
    for metric in (flat_metric(3), bumpy):
        assert abs(gauss_residual(metric, surf, q, 0, 1)) < 1e-4


def test_gauss_residual_rejects_equal_indices():
    with pytest.raises(ValueError):
        gauss_residual(flat_metric(3), sphere(np.zeros(3), 1.0), [1.0, 0, 0], 0, 0)


@given(st.floats(0.6, 1.6), st.floats(-1.0, 1.0), st.floats(-1.0, 1.0))
def test_foot_point_inverts_normal_exponential_flat(r, a, b):
    x = r * np.array([1.0, a, b]) / np.linalg.norm([1.0, a, b])
    res = foot_point(flat_metric(3), sphere(np.zeros(3), 1.0), x)
    assert res.distance == pytest.approx(r - 1.0, abs=1e-9)
    assert np.allclose(res.foot, x / r, atol=1e-9)


def test_parallel_sphere_shape():
    frame = parallel_shape(flat_metric(3), sphere(np.zeros(3), 1.0), np.array([0.0, 0.6, 0.8]), 0.25)
    assert np.allclose(frame.principal, 1 / 1.25, atol=1e-6)


def test_geodesic_normal_field_is_geodesic(bumpy):
    surf = sphere(np.zeros(3), 1.0)
    field = geodesic_normal_field(bumpy, surf)
    x = np.array([0.1, 0.2, 1.1])
    v = field(x)
    assert np.allclose(covariant_derivative(bumpy, field, x, v), 0, atol=1e-6)


def test_build_surface_validation():
    with pytest.raises(ScenarioError):
        build_surface({"family": "torus"})
    with pytest.raises(ScenarioError):
        build_surface({"family": "sphere", "center": [0, 0], "radius": -1})
    s = build_surface({"family": "plane", "normal": [0, 0, 1], "offset": 0.5})
    assert s.value(np.array([0, 0, 0.5])) == pytest.approx(0.0)


def test_degenerate_gradient_and_off_surface_raise():
    with pytest.raises(DegenerateSurfaceError):
        normal_vector(flat_metric(3), sphere(np.zeros(3), 1.0), np.zeros(3))
    with pytest.raises(DomainError):
        unit_normal(flat_metric(3), sphere(np.zeros(3), 1.0), np.zeros(3))
