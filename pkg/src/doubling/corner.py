"""Corner calculus on the first doubling ``Y_1 = D(X_1, X̄)``.

At ``p̃ = (p, t)`` on ``Y_1`` with ``p`` on the second wall, vectors of
``X̄ × ℝ`` are stored in product components ``(v, c)``.  ``γ_1`` is the normal
geodesic field of the first wall at ``p``, ``γ_2`` the unit normal of the
second wall, ``N = cosθ γ_1 + sinθ ∂_t`` and ``N' = -sinθ γ_1 + cosθ ∂_t``.

The horizontal lift is ``π⁻¹(v) = v - cotθ <v, γ_1> ∂_t`` (the factor
``<v, γ_1>`` is what makes ``<π⁻¹(v), N> = 0``); it does not exist at
``θ = 0`` unless ``v ⟂ γ_1``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import _christoffel, fd_gradient, geodesic_flow, gram_schmidt
from .errors import DegenerateCornerError, GeometryError, SingularLiftError
from .tube import fit_inverse_eps
from .hypersurface import (
    covariant_derivative,
    geodesic_normal_field,
    normal_vector,
    parallel_shape,
    shape_operator,
)

TRANSVERSALITY_MARGIN = 1e-6


def _inner(G, u, v):
    return np.einsum("...i,...ij,...j->...", u, G, v)


def _scalar(x):
    x = np.asarray(x)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True, eq=False)
class CornerFrame:
    """Pointwise data at ``p̃``; ``geometry`` is set for frames built on actual walls.

    The algebraic fields may carry leading batch dimensions (``metric`` of
    shape ``(..., n, n)``, vectors ``(..., n)``, ``theta`` ``(...)``), so that
    the projection calculus runs on many random frames at once.
    """

    metric: np.ndarray  # g at p
    gamma1: np.ndarray
    gamma2: np.ndarray
    theta: float
    eps: float = 1.0
    gamma3: np.ndarray = None
    p: np.ndarray = None
    geometry: object = field(default=None, repr=False)

    @property
    def n(self):
        return self.gamma1.shape[-1]

    @property
    def product_metric(self):
        lead = np.shape(self.metric)[:-2]
        Gt = np.zeros(lead + (self.n + 1, self.n + 1))
        Gt[..., : self.n, : self.n] = self.metric
        Gt[..., self.n, self.n] = 1.0
        return Gt

    @property
    def _cos(self):
        return np.cos(np.asarray(self.theta, float))[..., None]

    @property
    def _sin(self):
        return np.sin(np.asarray(self.theta, float))[..., None]

    @property
    def N(self):
        return np.concatenate([self._cos * self.gamma1, self._sin], axis=-1)

    @property
    def N_prime(self):
        return np.concatenate([-self._sin * self.gamma1, self._cos], axis=-1)

    @property
    def pairing(self):
        """``<γ_2, γ_1>``."""
        return self.inner(self.gamma2, self.gamma1)

    def inner(self, u, v):
        return _scalar(_inner(self.metric, u, v))

    def product_inner(self, u, v):
        return _scalar(_inner(self.product_metric, u, v))

    def tangent_to_wall2(self):
        """g-orthonormal basis of ``T_p ∂X_2`` (columns); single frames only."""
        proj = np.eye(self.n) - np.outer(self.gamma2, self.gamma2 @ self.metric)
        return gram_schmidt(self.metric, proj)[:, : self.n - 1]

    def check(self):
        for name, v in (("gamma1", self.gamma1), ("gamma2", self.gamma2)):
            if np.any(np.abs(_inner(self.metric, v, v) - 1.0) > 1e-10):
                raise ValueError(f"{name} is not a unit vector")
        if np.any(np.abs(self.pairing) > 1.0 - TRANSVERSALITY_MARGIN):
            raise DegenerateCornerError("walls are not transverse at p")
        return self


def project_pi(w):
    """Drop the ``∂_t`` component."""
    return np.asarray(w, dtype=float)[..., :-1]


def lift_pi_inv(v, frame):
    """The tangent of ``Y_1`` over ``v``: ``v - cotθ <v, γ_1> ∂_t``."""
    v = np.asarray(v, dtype=float)
    a = _inner(frame.metric, v, frame.gamma1)
    s, c = frame._sin[..., 0], frame._cos[..., 0]
    singular = np.abs(s) < 1e-15
    if np.any(singular):
        size = np.sqrt(np.maximum(_inner(frame.metric, v, v), 1.0))
        if np.any(singular & (np.abs(a) > 1e-14 * size)):
            raise SingularLiftError("no lift of a vector with <v, γ1> ≠ 0 at θ = 0")
    t = np.where(singular, 0.0, -c * a / np.where(singular, 1.0, s))
    return np.concatenate([v, np.broadcast_to(t, v.shape[:-1])[..., None]], axis=-1)


def pi_star(v, frame):
    """Adjoint of ``π``: ``v - cosθ <v, γ_1> N``."""
    v = np.asarray(v, dtype=float)
    a = _inner(frame.metric, v, frame.gamma1)[..., None]
    pad = np.concatenate([v, np.zeros(v.shape[:-1] + (1,))], axis=-1)
    return pad - frame._cos * a * frame.N


def pi_pi_star(v, frame):
    """``π∘π* = I - cos²θ <·, γ_1> γ_1``."""
    v = np.asarray(v, dtype=float)
    a = _inner(frame.metric, v, frame.gamma1)[..., None]
    return v - frame._cos**2 * a * frame.gamma1


def pi_pi_star_matrix(frame):
    c2 = frame._cos[..., None] ** 2
    low = np.einsum("...i,...ij->...j", frame.gamma1, frame.metric)
    return np.eye(frame.n) - c2 * np.einsum("...i,...j->...ij", frame.gamma1, low)


def corner_normal(frame):
    """``n = π*(γ_2)`` and its product-metric norm."""
    nvec = pi_star(frame.gamma2, frame)
    nrm = np.sqrt(_inner(frame.product_metric, nvec, nvec))
    if np.any(nrm < 1e-6):
        raise DegenerateCornerError("corner normal vanishes: walls are tangent")
    return nvec, _scalar(nrm)


def corner_constant(pairing, theta):
    """``C = (1 - a²) / (1 - cos²θ a²)`` for ``a = <γ_2, γ_1>``."""
    a2 = np.asarray(pairing, dtype=float) ** 2
    return (1.0 - a2) / (1.0 - np.cos(theta) ** 2 * a2)


def dihedral_pairing(frame):
    """``<π*(γ_2), π*(γ_3)>`` in the product metric."""
    if frame.gamma3 is None:
        raise ValueError("dihedral_pairing needs gamma3 on the frame")
    return frame.product_inner(pi_star(frame.gamma2, frame), pi_star(frame.gamma3, frame))


def dihedral_pairing_closed_form(frame):
    c2 = np.cos(np.asarray(frame.theta, float)) ** 2
    g1 = frame.gamma1
    return (frame.inner(frame.gamma2, frame.gamma3)
            - c2 * frame.inner(frame.gamma3, g1) * frame.inner(frame.gamma2, g1))


def random_spd(rng, count, n, spread=0.5):
    """Seeded SPD matrices ``I + spread·A Aᵀ/n``."""
    A = rng.normal(size=(count, n, n))
    return np.eye(n) + spread * np.einsum("kij,klj->kil", A, A) / n


def random_unit(rng, G):
    """One g-unit vector per metric in the batch ``G``."""
    v = rng.normal(size=G.shape[:-1])
    return v / np.sqrt(_inner(G, v, v))[..., None]


def random_frames(rng, count, n=3, with_gamma3=False, theta_range=(-np.pi / 2, np.pi / 2)):
    """Batch of algebraic frames with random metric, normals and angle.

    Pairs that violate the transversality margin are resampled.
    """
    G = random_spd(rng, count, n)
    g1 = random_unit(rng, G)
    g2 = random_unit(rng, G)
    for _ in range(100):
        bad = np.abs(_inner(G, g1, g2)) > 1.0 - 1e-3
        if not np.any(bad):
            break
        g2[bad] = random_unit(rng, G[bad])
    g3 = random_unit(rng, G) if with_gamma3 else None
    theta = rng.uniform(*theta_range, size=count)
    return CornerFrame(G, g1, g2, theta, gamma3=g3)


def random_acute_triples(rng, count, n=3, batch=None):
    """Random frames with all three pairings ``<γ_i, γ_j>`` negative (rejection sampling)."""
    batch = 4 * count if batch is None else batch
    parts, have = [], 0
    while have < count:
        fr = random_frames(rng, batch, n, with_gamma3=True)
        ok = (fr.inner(fr.gamma2, fr.gamma1) < 0) & (fr.inner(fr.gamma3, fr.gamma1) < 0) & (
            fr.inner(fr.gamma2, fr.gamma3) < 0)
        idx = np.flatnonzero(ok)
        parts.append((fr, idx))
        have += idx.size
    cat = lambda get: np.concatenate([get(f)[i] for f, i in parts])[:count]
    return CornerFrame(cat(lambda f: f.metric), cat(lambda f: f.gamma1), cat(lambda f: f.gamma2),
                       cat(lambda f: np.asarray(f.theta)), gamma3=cat(lambda f: f.gamma3))


# --------------------------------------------------------------------------------------
# geometric frames


@dataclass(frozen=True, eq=False)
class CornerGeometry:
    """Walls ``∂X_1``, ``∂X_2`` (optionally ``∂X_3``) meeting along an edge through ``edge``.

    ``point(xi, theta, eps)`` returns the point of ``∂_1X_2`` over edge
    coordinates ``xi`` at angle ``theta``: ``q_1`` on the first wall,
    ``p = exp_{q_1}(ε cosθ γ_1)`` on the second wall, and ``γ_1(p)``.
    """

    metric: object
    wall1: object
    wall2: object
    edge: np.ndarray
    wall3: object = None

    def __post_init__(self):
        g, e = self.metric, np.asarray(self.edge, float)
        G = g(e)
        n1 = normal_vector(g, self.wall1, e)
        n2 = normal_vector(g, self.wall2, e)
        w = n2 - float(n2 @ G @ n1) * n1
        nw = np.sqrt(w @ G @ w)
        if nw < TRANSVERSALITY_MARGIN:
            raise DegenerateCornerError("walls are tangent at the edge point")
        basis = gram_schmidt(G, np.column_stack([n1, w, np.eye(e.size)]))
        object.__setattr__(self, "edge", e)
        object.__setattr__(self, "_n1", n1)
        object.__setattr__(self, "_w", w / nw)
        object.__setattr__(self, "_tau", basis[:, 2:])

    @property
    def edge_dim(self):
        return self._tau.shape[1]

    def _onto_wall1(self, b):
        lam = 0.0
        x = b
        for _ in range(60):
            x = b + lam * self._n1
            fx = float(self.wall1.value(x))
            d = float(self.wall1.gradient(x) @ self._n1)
            step = fx / d
            lam -= step
            if abs(step) < 1e-15 * self.metric.scale:
                break
        return b + lam * self._n1

    def _shoot(self, q1, r):
        nu = normal_vector(self.metric, self.wall1, q1)
        (p,), (v,) = geodesic_flow(self.metric, q1[None], nu[None], r)
        return p, v

    def point(self, xi, theta, eps):
        g = self.metric
        base = self.edge + self._tau @ np.asarray(xi, dtype=float).reshape(self.edge_dim)
        r = eps * np.cos(theta)
        h = 1e-7 * g.scale

        def f2(beta):
            q1 = self._onto_wall1(base + beta * self._w)
            p, v = self._shoot(q1, r)
            return float(self.wall2.value(p)), q1, p, v

        beta = 0.0
        polish = False
        for _ in range(60):
            val, q1, p, v = f2(beta)
            if abs(val) < 1e-14:
                if polish:
                    break
                polish = True
            slope = (f2(beta + h)[0] - f2(beta - h)[0]) / (2 * h)
            if slope == 0:
                raise GeometryError("corner parametrization: wall 2 is parallel to the search line")
            beta -= val / slope
        else:
            if not polish:
                raise GeometryError("corner parametrization: Newton failed to reach wall 2")
        val, q1, p, v = f2(beta)
        return q1, p, v

    def frame(self, theta, eps, xi=None):
        xi = np.zeros(self.edge_dim) if xi is None else xi
        q1, p, gamma1 = self.point(xi, theta, eps)
        gamma2 = normal_vector(self.metric, self.wall2, p)
        gamma3 = None if self.wall3 is None else normal_vector(self.metric, self.wall3, p)
        ctx = {"q1": q1, "xi": np.asarray(xi, float)}
        return CornerFrame(self.metric(p), gamma1, gamma2, float(theta), float(eps), gamma3, p,
                           (self, ctx))


def corner_frame(metric, wall1, wall2, edge, theta, eps, wall3=None):
    return CornerGeometry(metric, wall1, wall2, edge, wall3).frame(theta, eps)


def _geometry(frame):
    if frame.geometry is None:
        raise ValueError("this operation needs a frame built on actual walls")
    return frame.geometry


# --------------------------------------------------------------------------------------
# mean curvature of the corner face


def corner_term1(frame, step=1e-4):
    """``H_p - cos²θ <∇_{γ_1} γ_2, γ_1>`` with ``γ_2`` the normal geodesic field of wall 2.

    This is ``trace(S ∘ π∘π*)``, the sum of ``<∇_e γ_2, e>`` over an
    orthonormal basis of the whole tangent space of ``Y_1``.
    """
    geo, _ = _geometry(frame)
    g = geo.metric
    H_p = shape_operator(g, geo.wall2, frame.p).mean
    dg2 = covariant_derivative(g, geodesic_normal_field(g, geo.wall2), frame.p, frame.gamma1, step)
    return H_p - np.cos(frame.theta) ** 2 * frame.inner(dg2, frame.gamma1)


def corner_term1_normal_part(frame, step=1e-4):
    """``<∇_u γ_2, u>`` for ``u = π(n/|n|)``.

    The face ``∂_1X_2`` misses the direction ``n/|n|`` of ``Y_1``, so the sum of
    ``<∇_{e_i} γ_2, e_i>`` over a basis of the face is :func:`corner_term1`
    minus this quantity.  For the geodesic normal field it equals
    ``cos⁴θ <γ_2, γ_1>² <∇_{γ_1} γ_2, γ_1> / |n|²``.
    """
    geo, _ = _geometry(frame)
    g = geo.metric
    _, nrm = corner_normal(frame)
    u = pi_pi_star(frame.gamma2, frame) / nrm
    du = covariant_derivative(g, geodesic_normal_field(g, geo.wall2), frame.p, u, step)
    return frame.inner(du, u)


def corner_face_term1(frame, step=1e-4):
    """``Σ <∇_{e_i} γ_2, e_i>`` over an orthonormal basis of the face at ``p̃``."""
    return corner_term1(frame, step) - corner_term1_normal_part(frame, step)


def corner_term1_trace(frame, step=1e-4):
    """``trace(∇γ_2 ∘ π∘π*)`` from the full finite-difference operator ``∇γ_2``."""
    geo, _ = _geometry(frame)
    g = geo.metric
    field_ = geodesic_normal_field(g, geo.wall2)
    n = frame.n
    h = step * g.scale
    nodes = np.array([-2.0, -1.0, 1.0, 2.0]) * h
    weights = np.array([1.0, -8.0, 8.0, -1.0]) / (12.0 * h)
    A = np.empty((n, n))
    gam = _christoffel(g, frame.p)
    for j in range(n):
        vals = np.array([field_(frame.p + t * np.eye(n)[j]) for t in nodes])
        A[:, j] = weights @ vals + gam[:, j, :] @ frame.gamma2
    return float(np.trace(A @ pi_pi_star_matrix(frame)))


@dataclass(frozen=True)
class Term2:
    value: float
    C: float
    nprime_component: float  # <n/|n|, N'>
    H_tube: float
    tube_quadratic: float
    M: float  # <S_{Y1}(v), n/|n|> / cosθ for the N'-orthogonal part v
    M_bound: float
    horizontal: np.ndarray


def corner_term2(frame, step=1e-3):
    """``-cosθ <γ_2, γ_1> (H_{Y_1} - <S_{Y_1}(n̂), n̂>)`` evaluated on the actual tube."""
    geo, ctx = _geometry(frame)
    g = geo.metric
    th, eps = frame.theta, frame.eps
    c = np.cos(th)
    expansion = parallel_shape(g, geo.wall1, ctx["q1"], eps * c, step)
    nvec, nrm = corner_normal(frame)
    nhat = nvec / nrm
    comp = frame.product_inner(nhat, frame.N_prime)
    horiz = (nhat - comp * frame.N_prime)[:-1]
    M = expansion.quadratic(horiz)
    H_tube = 1.0 / eps + c * expansion.mean
    quad = comp**2 / eps + c * M
    value = -c * frame.pairing * (H_tube - quad)
    bound = shape_operator(g, geo.wall1, ctx["q1"]).operator_norm + 10.0 * eps
    return Term2(float(value), float(corner_constant(frame.pairing, th)), float(comp),
                 float(H_tube), float(quad), float(M), float(bound), horiz)


def corner_H_formula(frame, term1=None, term2=None):
    """``((1) + (2)) / |n|`` with (1) summed over the face (:func:`corner_face_term1`)."""
    t1 = corner_face_term1(frame) if term1 is None else term1
    t2 = corner_term2(frame).value if term2 is None else term2
    return (t1 + t2) / corner_normal(frame)[1]


def corner_H_direct(frame, step=1e-3):
    """Mean curvature of ``∂_1X_2`` in ``Y_1`` from a parametrization of the face.

    Parameters are edge coordinates and the arclength-like ``s = εθ``; the
    unit normal ``n/|n|`` is differentiated along them and traced against
    the induced metric, with the product connection of ``X̄ × ℝ``.
    """
    geo, ctx = _geometry(frame)
    g = geo.metric
    eps = frame.eps
    k = geo.edge_dim
    u0 = np.append(ctx["xi"], eps * frame.theta)
    n = frame.n

    def evaluate(u):
        th = u[-1] / eps
        _, p, gamma1 = geo.point(u[:-1], th, eps)
        gamma2 = normal_vector(g, geo.wall2, p)
        fr = CornerFrame(g(p), gamma1, gamma2, th, eps)
        nvec, nrm = corner_normal(fr)
        return np.concatenate([p, [eps * np.sin(th)], nvec / nrm])

    def batch(U):
        U = np.asarray(U, float)
        flat = U.reshape(-1, k + 1)
        return np.array([evaluate(u) for u in flat]).reshape(U.shape[:-1] + (2 * n + 2,))

    h = step * eps
    D = fd_gradient(batch, u0, h)  # (k+1, 2n+2)
    dP, dn = D[:, : n + 1], D[:, n + 1 :]
    center = evaluate(u0)
    nhat = center[n + 1 :]
    Gt = frame.product_metric
    gam = _christoffel(g, center[:n])
    cov = dn.copy()
    cov[:, :n] += np.einsum("kij,ai,j->ak", gam, dP[:, :n], nhat[:n])
    h_ab = dP @ Gt @ dP.T
    B = cov @ Gt @ dP.T
    B = 0.5 * (B + B.T)
    return float(np.trace(np.linalg.solve(h_ab, B)))


def flat_walls_H(alpha, theta, eps):
    """Mean curvature of the corner face for two flat walls at interior angle ``alpha``."""
    ca, sa, ct = np.cos(alpha), np.sin(alpha), np.cos(theta)
    return ca * sa**2 * ct / (eps * (1.0 - ca**2 * ct**2) ** 1.5)


def flat_walls_term2(alpha, theta, eps):
    ca, sa, ct = np.cos(alpha), np.sin(alpha), np.cos(theta)
    return ct * ca * sa**2 / (eps * (1.0 - ca**2 * ct**2))


@dataclass(frozen=True)
class CornerReport:
    theta: float
    eps: float
    term1: float
    term1_trace: float
    term1_normal_part: float
    term2: float
    norm_n: float
    H_formula: float
    H_trace_form: float  # (term1 + term2) / |n|, without the normal-part correction
    H_direct: float
    C: float
    nprime_component: float
    M: float
    M_bound: float
    pairing: float
    H_p: float
    dihedral: float = float("nan")
    dihedral_closed: float = float("nan")
    dihedral_base: float = float("nan")


def corner_report(frame, with_trace=True):
    geo, _ = _geometry(frame)
    t1 = corner_term1(frame)
    t1n = corner_term1_normal_part(frame)
    t2 = corner_term2(frame)
    _, nrm = corner_normal(frame)
    H_p = shape_operator(geo.metric, geo.wall2, frame.p).mean
    extra = {}
    if frame.gamma3 is not None:
        extra = dict(
            dihedral=dihedral_pairing(frame),
            dihedral_closed=dihedral_pairing_closed_form(frame),
            dihedral_base=frame.inner(frame.gamma2, frame.gamma3),
        )
    return CornerReport(
        frame.theta, frame.eps, float(t1),
        corner_term1_trace(frame) if with_trace else float("nan"),
        float(t1n), t2.value, nrm, (t1 - t1n + t2.value) / nrm, (t1 + t2.value) / nrm,
        corner_H_direct(frame), t2.C,
        t2.nprime_component, t2.M, t2.M_bound, frame.pairing, H_p, **extra,
    )


def corner_sweep_fit(geometry, eps_list, theta):
    """Fit ``|n| H_p̃(ε) ≈ a/ε + b``; the expected ``a`` is ``-cosθ <γ_2, γ_1> C`` at the edge."""
    vals = []
    for e in eps_list:
        frame = geometry.frame(theta, e)
        vals.append(corner_normal(frame)[1] * corner_H_formula(frame))
    g, e = geometry.metric, geometry.edge
    a_edge = float(normal_vector(g, geometry.wall2, e) @ g(e) @ geometry._n1)
    expected = -np.cos(theta) * a_edge * float(corner_constant(a_edge, theta))
    return fit_inverse_eps(eps_list, vals, expected)
