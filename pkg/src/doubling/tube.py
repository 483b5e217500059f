"""The doubling tube: boundary of the ε-neighborhood of ``X' × {0}`` in ``X̄ × ℝ``.

A point of the rounded part is ``Φ(q, θ) = (exp_q(ε cosθ · γ(q)), ε sinθ)``
for ``q`` on ``∂X'`` and ``|θ| < π/2``.  Its outward normal is
``N = cosθ γ + sinθ ∂_t`` and ``N' = -sinθ γ + cosθ ∂_t`` is the
``1/ε``-principal direction; the other principal curvatures are ``cosθ`` times
those of the parallel surface of ``∂X'`` at distance ``ε cosθ``.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .core import ProductPoint, _christoffel, curvature, geodesic_flow, product_metric
from .errors import FitError
from .hypersurface import (
    local_graph_chart,
    normal_vector,
    parallel_shape,
    intrinsic_scalar,
    shape_operator,
)


@dataclass(frozen=True, eq=False)
class TubeGeometry:
    """Ambient metric on ``X̄``, boundary surface, tube radius ``eps`` and inset ``delta``."""

    metric: object
    surface: object
    eps: float
    delta: float = 0.0

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("tube radius must be positive")
        if self.delta < 0:
            raise ValueError("inset must be nonnegative")

    @property
    def inner(self):
        return self.surface.shifted(self.delta)

    @property
    def product(self):
        return product_metric(self.metric)

    def with_eps(self, eps):
        return TubeGeometry(self.metric, self.surface, eps, self.delta)


@dataclass(frozen=True)
class TubeFrame:
    q: np.ndarray
    theta: float
    eps: float
    point: ProductPoint
    gamma: np.ndarray
    N: np.ndarray
    N_prime: np.ndarray
    lambdas: np.ndarray
    expansion: object  # SurfaceFrame of the parallel surface at distance ε cosθ

    @property
    def coords(self):
        return self.point.coords()

    def tangent_basis(self):
        """Orthonormal principal frame of the tube: ``N'`` first, then horizontal directions."""
        W = self.expansion.directions
        horiz = np.vstack([W, np.zeros((1, W.shape[1]))])
        return np.column_stack([self.N_prime, horiz])


def _check_theta(theta):
    if not abs(theta) <= np.pi / 2:
        raise ValueError("θ must lie in [-π/2, π/2]")


def tube_point(T, q, theta):
    _check_theta(theta)
    q = np.asarray(q, dtype=float)
    r = T.eps * np.cos(theta)
    (p,), _ = geodesic_flow(T.metric, q[None], normal_vector(T.metric, T.inner, q)[None], r)
    return ProductPoint(p, T.eps * np.sin(theta))


def tube_frame(T, q, theta):
    _check_theta(theta)
    q = np.asarray(q, dtype=float)
    c, s = np.cos(theta), np.sin(theta)
    exp_frame = parallel_shape(T.metric, T.inner, q, T.eps * c)
    gamma = exp_frame.normal
    N = np.append(c * gamma, s)
    N_prime = np.append(-s * gamma, c)
    lambdas = np.concatenate([[1.0 / T.eps], c * exp_frame.principal])
    return TubeFrame(q, theta, T.eps, ProductPoint(exp_frame.point, T.eps * s), gamma, N,
                     N_prime, lambdas, exp_frame)


def tube_principal_curvatures(T, q, theta):
    """``(λ_0, λ_1, ..., λ_{n-1})`` with ``λ_0 = 1/ε``."""
    return tube_frame(T, q, theta).lambdas


def elementary_symmetric_2(values):
    v = np.asarray(values, dtype=float)
    return 0.5 * (v.sum() ** 2 - (v**2).sum())


def tube_scalar_formula(T, q, theta, frame=None):
    """Scalar curvature of the tube from the Gauss equation.

    Sum over pairs of an orthonormal principal frame of the ambient sectional
    curvature plus ``λ_a λ_b``; the eigenvalue part is the basis-free
    ``2 σ_2(λ)``.
    """
    frame = tube_frame(T, q, theta) if frame is None else frame
    curv = curvature(T.product, frame.coords)
    E = frame.tangent_basis()
    ambient_pairs = sum(
        float(curv.sectional(E[:, a], E[:, b])) for a, b in combinations(range(E.shape[1]), 2)
    )
    return 2.0 * ambient_pairs + 2.0 * elementary_symmetric_2(frame.lambdas)


class _TubeEmbedding:
    """``(y, s) ↦ Φ(q(y), s/ε)`` over a graph patch of the boundary; ``s`` is arclength-like."""

    def __init__(self, T, patch, t_shift=0.0):
        self.T = T
        self.patch = patch
        self.t_shift = t_shift

    def __call__(self, U):
        T = self.T
        Q = self.patch(U[..., :-1])
        V = normal_vector(T.metric, T.inner, Q)
        ang = U[..., -1] / T.eps
        X, _ = geodesic_flow(T.metric, Q, V, T.eps * np.cos(ang))
        return np.concatenate([X, (T.eps * np.sin(ang) + self.t_shift)[..., None]], axis=-1)


def tube_scalar_direct(T, q, theta, step=2e-2, t_shift=0.0):
    """Scalar curvature of the induced metric on the tube (finite-difference oracle)."""
    _check_theta(theta)
    q = np.asarray(q, dtype=float)
    patch = local_graph_chart(T.inner, q)
    u0 = np.append(patch.params_of(q), T.eps * theta)
    emb = _TubeEmbedding(T, patch, t_shift)
    return intrinsic_scalar(T.product, emb, u0, T.eps, step)


def shape_on_n_prime(T, q, theta, step=1e-3):
    """``S_tube(N') = ∇_{N'} N`` by differentiating ``N`` along the θ-curve through ``Φ(q, θ)``."""
    q = np.asarray(q, dtype=float)
    nu_q = normal_vector(T.metric, T.inner, q)
    thetas = theta + np.array([-2.0, -1.0, 1.0, 2.0]) * step
    _, nus = geodesic_flow(T.metric, np.tile(q, (4, 1)), np.tile(nu_q, (4, 1)), T.eps * np.cos(thetas))
    Ns = np.column_stack([np.cos(thetas)[:, None] * nus, np.sin(thetas)])
    dN = np.array([1.0, -8.0, 8.0, -1.0]) @ Ns / (12.0 * step)
    frame = tube_frame(T, q, theta)
    n = q.size
    velocity = T.eps * frame.N_prime
    gam = _christoffel(T.metric, frame.point.base)
    cov = dN.copy()
    cov[:n] += np.einsum("kij,i,j->k", gam, velocity[:n], frame.N[:n])
    return cov / T.eps, frame


@dataclass(frozen=True)
class SweepFit:
    """Least-squares fit ``y(ε) ≈ a/ε + b``.

    For tube sweeps ``y = (κ_tube - κ_X) / 2``: the sum of sectional
    curvatures over unordered pairs, so that ``a`` is directly comparable
    with ``cosθ · H``.
    """

    a: float
    b: float
    residual: float
    eps: tuple
    values: tuple
    expected_a: float = float("nan")

    @property
    def relative_error(self):
        if self.expected_a == 0:
            return abs(self.a)
        return abs(self.a - self.expected_a) / abs(self.expected_a)


def fit_inverse_eps(eps_list, values, expected_a=float("nan")):
    eps = np.asarray(eps_list, dtype=float)
    y = np.asarray(values, dtype=float)
    if np.unique(eps).size < 2:
        raise FitError("need at least two distinct ε values to fit a/ε + b")
    A = np.column_stack([1.0 / eps, np.ones_like(eps)])
    (a, b), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = float(np.max(np.abs(A @ np.array([a, b]) - y)))
    return SweepFit(float(a), float(b), res, tuple(eps.tolist()), tuple(y.tolist()), expected_a)


def ambient_scalar(metric, x):
    return float(curvature(metric, np.asarray(x, float)).scalar)


def tube_sweep_fit(T, eps_list, q, theta):
    """Fit the ``1/ε`` coefficient of the tube's scalar curvature over ``eps_list``.

    The expected coefficient is ``cosθ · H`` with ``H`` the mean curvature of
    the inner boundary at ``q``.
    """
    q = np.asarray(q, dtype=float)
    kappa_x = ambient_scalar(T.metric, q)
    H = shape_operator(T.metric, T.inner, q).mean
    vals = [0.5 * (tube_scalar_formula(T.with_eps(e), q, theta) - kappa_x) for e in eps_list]
    return fit_inverse_eps(eps_list, vals, np.cos(theta) * H)


def lambda_deviation(T, q, theta, frame=None):
    """``max_i |λ_i / cosθ - μ_i|``: size of the O(ε) correction in the principal curvatures."""
    frame = tube_frame(T, q, theta) if frame is None else frame
    mu = shape_operator(T.metric, T.inner, np.asarray(q, float)).principal
    return float(np.max(np.abs(np.sort(frame.lambdas[1:] / np.cos(theta)) - np.sort(mu))))
