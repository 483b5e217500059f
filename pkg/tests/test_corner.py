import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from doubling.corner import (
    CornerFrame,
    CornerGeometry,
    corner_H_direct,
    corner_H_formula,
    corner_constant,
    corner_face_term1,
    corner_normal,
    corner_report,
    corner_sweep_fit,
    corner_term1,
    corner_term1_trace,
    corner_term2,
    dihedral_pairing,
    dihedral_pairing_closed_form,
    flat_walls_H,
    flat_walls_term2,
    lift_pi_inv,
    pi_pi_star,
    pi_pi_star_matrix,
    pi_star,
    project_pi,
    random_acute_triples,
    random_frames,
)
from doubling.errors import DegenerateCornerError, SingularLiftError
from doubling.scenarios import builtin


def geometry(name, **params):
    if name == "conformal-perturbed":
        params.setdefault("base", "sphere-wall-pair")
    sc = builtin(name, params or None)
    return CornerGeometry(sc.metric, sc.surfaces["wall1"], sc.surfaces["wall2"], sc.edge,
                          sc.surfaces.get("wall3"))


def _dot(G, u, v):
    return np.einsum("...i,...ij,...j->...", u, G, v)


# --------------------------------------------------------------------------------------
# projection calculus on random frames


@pytest.fixture(scope="module")
def frames():
    return random_frames(np.random.default_rng(0), 2000, n=4, theta_range=(0.05, np.pi / 2))


def test_lift_is_tangent_and_projects_back(frames, rng):
    v = rng.normal(size=(2000, 4))
    w = lift_pi_inv(v, frames)
    assert np.allclose(project_pi(w), v)
    assert np.max(np.abs(_dot(frames.product_metric, w, frames.N))) < 1e-10


def test_pi_star_is_adjoint_of_pi(frames, rng):
    v = rng.normal(size=(2000, 4))
    w = lift_pi_inv(rng.normal(size=(2000, 4)), frames)
    lhs = _dot(frames.metric, project_pi(w), v)
    rhs = _dot(frames.product_metric, w, pi_star(v, frames))
    assert np.allclose(lhs, rhs, atol=1e-10)
    assert np.max(np.abs(_dot(frames.product_metric, pi_star(v, frames), frames.N))) < 1e-10


def test_pi_pi_star_forms_agree(frames, rng):
    v = rng.normal(size=(2000, 4))
    via_matrix = np.einsum("...ij,...j->...i", pi_pi_star_matrix(frames), v)
    assert np.allclose(pi_pi_star(v, frames), via_matrix, atol=1e-12)
    assert np.allclose(project_pi(pi_star(v, frames)), via_matrix, atol=1e-12)


def test_normal_norm_identity(frames):
    _, nrm = corner_normal(frames)
    a = frames.pairing
    assert np.allclose(nrm**2, 1 - np.cos(frames.theta) ** 2 * a**2, atol=1e-12)


def test_lift_at_theta_zero():
    G = np.eye(3)
    fr = CornerFrame(G, np.array([1.0, 0, 0]), np.array([0.0, 1, 0]), 0.0)
    assert np.allclose(lift_pi_inv([0.0, 1.0, 0.0], fr), [0, 1, 0, 0])
    with pytest.raises(SingularLiftError):
        lift_pi_inv([1.0, 0.0, 0.0], fr)


def test_tangent_walls_are_degenerate():
    fr = CornerFrame(np.eye(3), np.array([1.0, 0, 0]), np.array([1.0, 0, 0]), 0.0)
    with pytest.raises(DegenerateCornerError):
        corner_normal(fr)


@given(st.floats(-0.999, 0.999), st.floats(-np.pi / 2, np.pi / 2))
def test_corner_constant_range(a, theta):
    C = corner_constant(a, theta)
    assert 0 < C <= 1 + 1e-12
    assert C * (1 - np.cos(theta) ** 2 * a**2) == pytest.approx(1 - a**2, abs=1e-12)


def test_dihedral_pairing_closed_form_and_sign():
    fr = random_acute_triples(np.random.default_rng(1), 5000)
    d = dihedral_pairing(fr)
    assert np.allclose(d, dihedral_pairing_closed_form(fr), atol=1e-12)
    assert np.all(d <= fr.inner(fr.gamma2, fr.gamma3) + 1e-15)
    assert np.all(d < 0)


def test_dihedral_needs_gamma3():
    with pytest.raises(ValueError):
        dihedral_pairing(CornerFrame(np.eye(3), np.eye(3)[0], np.eye(3)[1], 0.3))


# --------------------------------------------------------------------------------------
# geometric corners


@pytest.mark.parametrize("alpha", [60.0, 80.0, 89.0])
@pytest.mark.parametrize("theta", [0.0, 0.6, -1.1])
def test_flat_walls_match_closed_form(alpha, theta):
    fr = geometry("euclidean-halfspace-walls", alpha=alpha).frame(theta, 1e-2)
    want = flat_walls_H(np.radians(alpha), theta, 1e-2)
    assert corner_H_formula(fr) == pytest.approx(want, abs=1e-4)
    assert corner_H_direct(fr) == pytest.approx(want, abs=1e-4)


def test_flat_walls_term2_closed_form():
    fr = geometry("euclidean-halfspace-walls", alpha=80.0).frame(0.4, 1e-3)
    want = flat_walls_term2(np.radians(80.0), 0.4, 1e-3)
    assert corner_term2(fr).value == pytest.approx(want, rel=1e-4)
    assert abs(corner_term1(fr)) < 1e-9


def test_frame_lies_on_both_walls():
    geo = geometry("sphere-wall-pair")
    fr = geo.frame(0.7, 1e-2)
    assert abs(geo.wall2.value(fr.p)) < 1e-12
    q1 = fr.geometry[1]["q1"]
    assert abs(geo.wall1.value(q1)) < 1e-12


@pytest.mark.parametrize("name", ["sphere-wall-pair", "conformal-perturbed"])
@pytest.mark.parametrize("theta", [-1.2, 0.0, 0.9])
def test_formula_matches_direct_on_curved_walls(name, theta):
    fr = geometry(name).frame(theta, 1e-2)
    assert corner_H_formula(fr) == pytest.approx(corner_H_direct(fr), rel=1e-3)


def test_term1_trace_route():
    fr = geometry("sphere-wall-pair").frame(0.4, 1e-2)
    assert corner_term1(fr) == pytest.approx(corner_term1_trace(fr), abs=1e-6)
    assert corner_face_term1(fr) != corner_term1(fr)


def test_term2_bound_and_report():
    fr = geometry("sphere-wall-pair").frame(0.3, 1e-3)
    t2 = corner_term2(fr)
    assert abs(t2.M) <= t2.M_bound
    rep = corner_report(fr, with_trace=False)
    assert np.isnan(rep.term1_trace)
    assert rep.H_formula == pytest.approx(rep.H_direct, rel=1e-3)
    assert rep.pairing < 0 and rep.H_formula > 0


@pytest.mark.parametrize("theta", [0.0, np.pi / 3])
def test_sweep_fit_coefficient(theta):
    fit = corner_sweep_fit(geometry("sphere-wall-pair"), [1e-2, 5e-3, 2e-3, 1e-3], theta)
    assert fit.relative_error < 0.02


def test_obtuse_walls_give_negative_mean_curvature():
    fr = geometry("euclidean-halfspace-walls", alpha=170.0).frame(0.0, 1e-3)
    assert corner_H_formula(fr) < 0


def test_operations_need_geometry():
    with pytest.raises(ValueError):
        corner_term1(CornerFrame(np.eye(3), np.eye(3)[0], np.eye(3)[1], 0.3))
