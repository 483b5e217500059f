import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doubling.errors import FitError
from doubling.hypersurface import plane, sphere
from doubling.metrics import conformal_metric, flat_metric, random_polynomial_terms
from doubling.tube import (
    TubeGeometry,
    elementary_symmetric_2,
    fit_inverse_eps,
    lambda_deviation,
    shape_on_n_prime,
    tube_frame,
    tube_point,
    tube_principal_curvatures,
    tube_scalar_direct,
    tube_scalar_formula,
    tube_sweep_fit,
)

Q = np.array([0.0, 0.6, 0.8])


def ball(eps, metric=None, delta=0.0):
    return TubeGeometry(metric or flat_metric(3), sphere(np.zeros(3), 1.0), eps, delta)


def test_geometry_validation():
    with pytest.raises(ValueError):
        ball(0.0)
    with pytest.raises(ValueError):
        ball(0.1, delta=-1.0)
    with pytest.raises(ValueError):
        tube_point(ball(0.1), Q, 2.0)


def test_elementary_symmetric_2():
    assert elementary_symmetric_2([1.0, 2.0, 3.0]) == pytest.approx(11.0)


@given(st.floats(-1.4, 1.4), st.sampled_from([0.1, 0.01]))
def test_round_ball_principal_curvatures(theta, eps):
    lam = tube_principal_curvatures(ball(eps), Q, theta)
    c = np.cos(theta)
    assert lam[0] == 1 / eps
    assert np.allclose(lam[1:], c / (1 + eps * c), rtol=1e-6)


def test_tube_point_and_frame_orthonormal():
    T = ball(0.1)
    p = tube_point(T, Q, np.pi / 6)
    assert np.allclose(p.base, Q * (1 + 0.1 * np.cos(np.pi / 6)))
    assert p.t == pytest.approx(0.05)
    E = tube_frame(T, Q, 0.4).tangent_basis()
    assert np.allclose(E.T @ E, np.eye(3), atol=1e-9)


def test_halfspace_tube_is_flat():
    T = TubeGeometry(flat_metric(3), plane([1, 0, 0], 0.0), 0.05)
    q = np.array([0.0, 0.2, -0.1])
    assert abs(tube_scalar_formula(T, q, 0.3)) < 1e-9
    assert abs(tube_scalar_direct(T, q, 0.3)) < 1e-6


@pytest.mark.parametrize("theta", [-1.2, 0.0, 0.7])
def test_formula_matches_induced_metric_oracle(theta):
    g = conformal_metric(3, random_polynomial_terms(3, seed=7, amplitude=0.05))
    T = ball(0.01, g)
    f = tube_scalar_formula(T, Q, theta)
    d = tube_scalar_direct(T, Q, theta)
    assert f == pytest.approx(d, rel=1e-3)


def test_n_prime_is_principal_with_inverse_radius():
    T = ball(0.01, conformal_metric(3, random_polynomial_terms(3, seed=2, amplitude=0.05)))
    SN, frame = shape_on_n_prime(T, Q, 0.5)
    assert np.allclose(SN, frame.N_prime / T.eps, rtol=1e-4, atol=1e-4 / T.eps)


def test_lambda_deviation_is_order_eps():
    devs = [lambda_deviation(ball(e), Q, 0.0) for e in (1e-2, 1e-3)]
    assert devs[1] < devs[0] / 5


def test_fit_recovers_exact_coefficients():
    eps = np.array([0.1, 0.05, 0.01])
    fit = fit_inverse_eps(eps, 3.0 / eps - 1.5, 3.0)
    assert fit.a == pytest.approx(3.0) and fit.b == pytest.approx(-1.5)
    assert fit.relative_error < 1e-12
    with pytest.raises(FitError):
        fit_inverse_eps([0.1, 0.1], [1.0, 2.0])


@pytest.mark.parametrize("theta", [0.0, np.pi / 6, np.pi / 3])
def test_ball_sweep_coefficient(theta):
    fit = tube_sweep_fit(ball(0.1), [1e-2, 5e-3, 2e-3, 1e-3], Q, theta)
    assert fit.a == pytest.approx(2.0 * np.cos(theta), rel=0.02)
