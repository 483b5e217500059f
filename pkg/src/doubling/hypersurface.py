"""Oriented level-set hypersurfaces and their extrinsic geometry.

Conventions: the unit normal ``ν`` points in the declared outward direction
and the shape operator is ``S(v) = ∇_v ν`` restricted to tangent vectors, so
a round sphere with outward normal has ``S = I / R`` and positive mean
curvature ``H = tr S``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .core import (
    MetricField,
    _christoffel,
    christoffel,
    curvature,
    fd_gradient,
    geodesic_flow,
    gram_schmidt,
    sectional,
)
from .errors import (
    DegenerateSurfaceError,
    DomainError,
    FocalRegionError,
    ImmersionError,
    PatchRadiusError,
    ScenarioError,
)

REGULARITY_FLOOR = 1e-8
ON_SURFACE_TOL = 1e-10


def batched(fn, k):
    """Let ``fn`` (rows ``(m, k)`` in, rows out) accept any leading shape."""

    def wrapped(u):
        u = np.asarray(u, dtype=float)
        lead = u.shape[:-1]
        out = fn(u.reshape(-1, k))
        return out.reshape(lead + out.shape[1:])

    return wrapped


# --------------------------------------------------------------------------------------
# surfaces


@dataclass(frozen=True, eq=False)
class LevelSetSurface:
    """``{f = 0}`` with outward direction ``outward · grad f`` (``outward`` is ±1).

    ``grad`` and ``hess`` are optional analytic derivatives; missing ones are
    computed by central differences with step ``fd_step``.
    """

    f: object
    grad: object = None
    hess: object = None
    outward: int = 1
    name: str = ""
    spec: dict = field(default=None, repr=False)
    fd_step: float = 1e-4

    def value(self, x):
        return np.asarray(self.f(np.asarray(x, dtype=float)), dtype=float)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.grad is not None:
            return np.asarray(self.grad(x), dtype=float)
        return fd_gradient(self.f, x, self.fd_step)

    def hessian(self, x):
        x = np.asarray(x, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(x), dtype=float)
        H = fd_gradient(self.gradient, x, 10 * self.fd_step)
        return 0.5 * (H + np.swapaxes(H, -1, -2))

    def shifted(self, delta):
        """Level shift moving the surface ``delta`` (in units of ``f``) against ``outward``."""
        if delta == 0:
            return self
        spec = None if self.spec is None else {**self.spec, "inset": delta}
        return LevelSetSurface(_Shift(self.f, self.outward * delta), self.grad, self.hess,
                               self.outward, self.name, spec, self.fd_step)


class _Shift:
    def __init__(self, f, c):
        self.f, self.c = f, c

    def __call__(self, x):
        return self.f(x) + self.c


class _Sphere:
    def __init__(self, center, radius):
        self.c = np.asarray(center, float)
        self.r = float(radius)

    def f(self, x):
        d = x - self.c
        return np.sum(d * d, axis=-1) - self.r**2

    def grad(self, x):
        return 2.0 * (x - self.c)

    def hess(self, x):
        n = self.c.size
        return np.broadcast_to(2.0 * np.eye(n), np.shape(x)[:-1] + (n, n))


class _Plane:
    def __init__(self, normal, offset):
        self.n = np.asarray(normal, float)
        self.b = float(offset)

    def f(self, x):
        return x @ self.n - self.b

    def grad(self, x):
        return np.broadcast_to(self.n, np.shape(x)).copy()

    def hess(self, x):
        n = self.n.size
        return np.zeros(np.shape(x)[:-1] + (n, n))


class _Ellipsoid:
    def __init__(self, center, axes):
        self.c = np.asarray(center, float)
        self.a2 = np.asarray(axes, float) ** 2

    def f(self, x):
        d = x - self.c
        return np.sum(d * d / self.a2, axis=-1) - 1.0

    def grad(self, x):
        return 2.0 * (x - self.c) / self.a2

    def hess(self, x):
        return np.broadcast_to(np.diag(2.0 / self.a2), np.shape(x)[:-1] + (self.c.size,) * 2)


class _Cylinder:
    def __init__(self, center, radius, axis):
        self.c = np.asarray(center, float)
        self.r = float(radius)
        self.mask = np.ones(self.c.size)
        self.mask[int(axis)] = 0.0

    def f(self, x):
        d = (x - self.c) * self.mask
        return np.sum(d * d, axis=-1) - self.r**2

    def grad(self, x):
        return 2.0 * (x - self.c) * self.mask

    def hess(self, x):
        return np.broadcast_to(np.diag(2.0 * self.mask), np.shape(x)[:-1] + (self.c.size,) * 2)


def build_surface(spec):
    """Build a :class:`LevelSetSurface` from a family spec dict."""
    fam = spec.get("family")
    outward = int(spec.get("outward", 1))
    if outward not in (1, -1):
        raise ScenarioError("surface.outward must be +1 or -1")
    try:
        if fam == "sphere":
            if float(spec["radius"]) <= 0:
                raise ScenarioError("sphere radius must be positive")
            obj = _Sphere(spec["center"], spec["radius"])
        elif fam == "plane":
            nrm = np.asarray(spec["normal"], float)
            if np.linalg.norm(nrm) == 0:
                raise ScenarioError("plane normal must be nonzero")
            obj = _Plane(nrm, spec.get("offset", 0.0))
        elif fam == "ellipsoid":
            if np.any(np.asarray(spec["axes"], float) <= 0):
                raise ScenarioError("ellipsoid semi-axes must be positive")
            obj = _Ellipsoid(spec["center"], spec["axes"])
        elif fam == "cylinder":
            obj = _Cylinder(spec["center"], spec["radius"], spec.get("axis", 0))
        else:
            raise ScenarioError(f"unknown surface family {fam!r}")
    except KeyError as exc:
        raise ScenarioError(f"surface family {fam!r} is missing field {exc.args[0]!r}") from None
    surf = LevelSetSurface(obj.f, obj.grad, obj.hess, outward, fam, dict(spec))
    inset = float(spec.get("inset", 0.0))
    if inset:
        surf = LevelSetSurface(_Shift(obj.f, outward * inset), obj.grad, obj.hess, outward,
                               fam, dict(spec))
    return surf


def sphere(center, radius, outward=1):
    return build_surface({"family": "sphere", "center": list(center), "radius": radius,
                          "outward": outward})


def plane(normal, offset=0.0, outward=1):
    return build_surface({"family": "plane", "normal": list(normal), "offset": offset,
                          "outward": outward})


def ellipsoid(center, axes, outward=1):
    return build_surface({"family": "ellipsoid", "center": list(center), "axes": list(axes),
                          "outward": outward})


def cylinder(center, radius, axis=0, outward=1):
    return build_surface({"family": "cylinder", "center": list(center), "radius": radius,
                          "axis": axis, "outward": outward})


# --------------------------------------------------------------------------------------
# normals and frames


def normal_vector(g, surface, x):
    """Outward unit normal at (batches of) points, without the on-surface check."""
    x = np.asarray(x, dtype=float)
    G = g(x)
    df = surface.gradient(x)
    w = np.linalg.solve(G, df[..., None])[..., 0]
    nrm = np.sqrt(np.einsum("...i,...i->...", df, w))
    if np.any(nrm < REGULARITY_FLOOR):
        raise DegenerateSurfaceError("|grad f| is below the regularity floor")
    return surface.outward * w / nrm[..., None]


def unit_normal(g, surface, x):
    """Outward g-unit normal of ``surface`` at a point on it."""
    x = np.asarray(x, dtype=float)
    if np.any(np.abs(surface.value(x)) >= ON_SURFACE_TOL):
        raise DomainError(f"point is not on the surface (|f| = {np.max(np.abs(surface.value(x))):.3g})")
    return normal_vector(g, surface, x)


@dataclass(frozen=True)
class SurfaceFrame:
    """Extrinsic data at one surface point.

    ``basis`` holds g-orthonormal tangent vectors as columns; ``shape`` is the
    shape operator in that basis; ``directions`` are principal directions
    (columns) for the ascending ``principal`` curvatures.
    """

    point: np.ndarray
    normal: np.ndarray
    basis: np.ndarray
    shape: np.ndarray
    principal: np.ndarray
    directions: np.ndarray
    metric: np.ndarray

    @property
    def mean(self):
        return float(np.trace(self.shape))

    @property
    def operator_norm(self):
        return float(np.max(np.abs(self.principal)))

    def coordinates(self, v):
        return self.basis.T @ self.metric @ np.asarray(v, float)

    def apply(self, v):
        """``S(v)`` for a tangent vector given in chart components."""
        return self.basis @ (self.shape @ self.coordinates(v))

    def quadratic(self, v):
        c = self.coordinates(v)
        return float(c @ self.shape @ c)


def tangent_basis(G, nu):
    n = nu.size
    proj = np.eye(n) - np.outer(nu, nu @ G)
    return gram_schmidt(G, proj)[:, : n - 1]


def shape_operator(g, surface, x):
    """Shape operator via the covariant Hessian of ``f``: ``<S u, v> = ±Hess f(u, v)/|∇f|``."""
    x = np.asarray(x, dtype=float)
    nu = unit_normal(g, surface, x)
    G = g(x)
    df = surface.gradient(x)
    gam = christoffel(g, x)
    hess = surface.hessian(x) - np.einsum("kij,k->ij", gam, df)
    grad_norm = np.sqrt(df @ np.linalg.solve(G, df))
    E = tangent_basis(G, nu)
    S = surface.outward * E.T @ hess @ E / grad_norm
    S = 0.5 * (S + S.T)
    mu, Y = np.linalg.eigh(S)
    return SurfaceFrame(x, nu, E, S, mu, E @ Y, G)


def mean_curvature(g, surface, x):
    return shape_operator(g, surface, x).mean


# --------------------------------------------------------------------------------------
# local graph patches


@dataclass(frozen=True, eq=False)
class GraphPatch:
    """Graph parametrization of a surface near ``base``: coordinate ``solved`` is a function of the rest."""

    surface: LevelSetSurface
    base: np.ndarray
    solved: int
    tol: float = 1e-10

    @property
    def free(self):
        return [i for i in range(self.base.size) if i != self.solved]

    def params_of(self, x):
        return np.asarray(x, float)[..., self.free]

    def pullback(self, v):
        return np.asarray(v, float)[..., self.free]

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        n = self.base.size
        k = self.solved
        x = np.empty(y.shape[:-1] + (n,))
        x[..., self.free] = y
        x[..., k] = self.base[k]
        scale = max(1.0, abs(self.base[k]))
        done_after = None
        for it in range(60):
            fx = self.surface.value(x)
            dk = self.surface.gradient(x)[..., k]
            if np.any(np.abs(dk) < REGULARITY_FLOOR):
                raise PatchRadiusError("graph patch left the region where it is a graph")
            step = fx / dk
            x[..., k] -= step
            if done_after is None and np.all(np.abs(step) <= 1e-14 * scale):
                done_after = it + 1
            if done_after is not None and it >= done_after:
                break
        if np.any(np.abs(self.surface.value(x)) >= self.tol) or not np.all(np.isfinite(x)):
            raise PatchRadiusError("Newton iteration for the graph patch did not converge")
        return x


def local_graph_chart(surface, x):
    """Graph patch of ``surface`` around ``x`` over all coordinates but the steepest one."""
    x = np.asarray(x, dtype=float)
    if abs(float(surface.value(x))) >= ON_SURFACE_TOL:
        raise DomainError("local_graph_chart needs a point on the surface")
    df = surface.gradient(x)
    if np.max(np.abs(df)) < REGULARITY_FLOOR:
        raise DegenerateSurfaceError("|grad f| is below the regularity floor")
    return GraphPatch(surface, x.copy(), int(np.argmax(np.abs(df))))


# --------------------------------------------------------------------------------------
# normal geodesics


@dataclass(frozen=True)
class NormalGeodesic:
    velocity: np.ndarray
    distance: float
    foot: np.ndarray


def _project_euclidean(surface, x, scale):
    q = np.array(x, dtype=float)
    for _ in range(100):
        fq = surface.value(q)
        dq = surface.gradient(q)
        nn = dq @ dq
        if nn < REGULARITY_FLOOR**2:
            raise DegenerateSurfaceError("|grad f| is below the regularity floor")
        step = fq / nn * dq
        q = q - step
        if np.linalg.norm(step) < 1e-15 * scale and abs(surface.value(q)) < ON_SURFACE_TOL:
            break
    return q


def foot_point(g, surface, x, tol=1e-12, max_iter=50):
    """Solve ``exp_q(d·ν(q)) = x`` for the foot point ``q`` on the surface and signed distance ``d``.

    Gradient projection for the initial guess, then Newton on
    ``(graph coordinates of q, d)`` with a finite-difference Jacobian.
    """
    x = np.asarray(x, dtype=float)
    scale = g.scale
    q0 = _project_euclidean(surface, x, scale)
    patch = GraphPatch(surface, q0, int(np.argmax(np.abs(surface.gradient(q0)))))
    nu0 = normal_vector(g, surface, q0)
    d0 = float((x - q0) @ g(q0) @ nu0)
    z = np.append(patch.params_of(q0), d0)
    k = z.size

    def shoot(Z):
        Q = patch(Z[..., :-1])
        V = normal_vector(g, surface, Q)
        return geodesic_flow(g, Q, V, Z[..., -1])

    def resid(Z):
        return shoot(Z)[0] - x

    polish = False
    for _ in range(max_iter):
        R = resid(z)
        if np.linalg.norm(R) < tol * scale:
            if polish:
                break
            polish = True
        J = fd_gradient(batched(resid, k), z, 1e-6 * scale)  # J[j, i] = dR_i/dz_j
        try:
            z = z + np.linalg.solve(J.T, -R)
        except np.linalg.LinAlgError:
            raise FocalRegionError("singular Jacobian in the foot-point solve") from None
        if not np.all(np.isfinite(z)):
            break
    else:
        if not polish:
            raise FocalRegionError("foot-point Newton did not converge in 50 iterations")
    if not polish or not np.all(np.isfinite(z)):
        raise FocalRegionError("foot-point Newton did not converge")
    X, V = shoot(z)
    return NormalGeodesic(V, float(z[-1]), patch(z[:-1]))


def normal_geodesic_field(g, surface, x):
    """Velocity at ``x`` of the unit normal geodesic through ``x``, with the signed distance and foot."""
    return foot_point(g, surface, x)


def covariant_derivative(g, vector_field, x, v, step=1e-4):
    """``∇_v X`` at ``x``: differentiate ``X`` along the geodesic ``s ↦ exp_x(s v)``."""
    x = np.asarray(x, dtype=float)
    v = np.asarray(v, dtype=float)
    h = step * g.scale
    params = np.array([-2.0, -1.0, 1.0, 2.0]) * h
    pts, _ = geodesic_flow(g, np.broadcast_to(x, (4, x.size)), np.broadcast_to(v, (4, x.size)), params)
    vals = np.array([vector_field(p) for p in pts])
    dX = np.array([1.0, -8.0, 8.0, -1.0]) @ vals / (12.0 * h)
    gam = _christoffel(g, x)
    return dX + np.einsum("kij,i,j->k", gam, v, vector_field(x))


def geodesic_normal_field(g, surface):
    """The unit normal geodesic field of ``surface`` as a function of a point."""
    return lambda p: foot_point(g, surface, p).velocity


# --------------------------------------------------------------------------------------
# expanded (parallel) surfaces


def parallel_shape(g, surface, q, r, step=1e-3):
    """Shape operator of the parallel surface at distance ``r`` through ``exp_q(r ν(q))``.

    The parallel surface is parametrized by ``y ↦ exp_{q(y)}(r ν(q(y)))`` over a
    graph patch of ``surface``; its second fundamental form comes from
    finite-difference second derivatives of that map.
    """
    q = np.asarray(q, dtype=float)
    patch = local_graph_chart(surface, q)
    y0 = patch.params_of(q)
    k = y0.size
    h = step * g.scale

    def F(Y):
        Q = patch(Y)
        return geodesic_flow(g, Q, normal_vector(g, surface, Q), r)[0]

    Fb = batched(F, k)
    (p,), (nu,) = geodesic_flow(g, q[None], normal_vector(g, surface, q)[None], r)
    J = fd_gradient(Fb, y0, h)  # (k, n)
    D2 = fd_gradient(lambda Y: fd_gradient(Fb, Y, h), y0, h)  # (k, k, n)
    G = g(p)
    gam = _christoffel(g, p)
    I = J @ G @ J.T
    acc = D2 + np.einsum("kij,ai,bj->abk", gam, J, J)
    II = np.einsum("abk,kl,l->ab", acc, G, nu)
    II = 0.5 * (II + II.T)
    if np.linalg.eigvalsh(I).min() <= 0:
        raise ImmersionError("parallel surface parametrization is degenerate")
    mu, Y = scipy.linalg.eigh(-II, I)
    D = J.T @ Y
    return SurfaceFrame(p, nu, D, np.diag(mu), mu, D, G)


# --------------------------------------------------------------------------------------
# intrinsic oracle


class InducedMetric:
    """Pullback ``J^T G(Φ) J`` of an ambient metric through an embedding ``Φ``."""

    def __init__(self, ambient, embedding, h):
        self.ambient = ambient
        self.embedding = embedding
        self.h = h

    def __call__(self, u):
        X = self.embedding(u)
        J = fd_gradient(self.embedding, u, self.h)
        return np.einsum("...ai,...ij,...bj->...ab", J, self.ambient(X), J)


def induced_metric(ambient, embedding, u0, scale, step=2e-2, extent=1.0):
    """Induced :class:`MetricField` on a parameter box around ``u0``.

    ``embedding`` maps ``(..., k)`` parameters to ``(..., n)`` ambient
    points.  All three derivative levels (embedding Jacobian, metric
    derivative, Christoffel derivative) use step ``step·scale``.
    """
    u0 = np.asarray(u0, dtype=float)
    k = u0.size
    emb = batched(embedding, k)
    field_ = MetricField(k, InducedMetric(ambient, emb, step * scale), u0 - extent * scale,
                         u0 + extent * scale, scale, False, step, step, "induced")
    G0 = field_(u0)
    if np.linalg.eigvalsh(G0).min() <= 1e-12 * np.abs(G0).max():
        raise ImmersionError("induced metric is degenerate at the parameter point")
    return field_


def intrinsic_curvature(ambient, embedding, u0, scale, step=2e-2):
    return curvature(induced_metric(ambient, embedding, u0, scale, step), u0)


def intrinsic_scalar(ambient, embedding, u0, scale, step=2e-2):
    """Scalar curvature of the induced metric: an independent check on Gauss-equation sums."""
    return float(intrinsic_curvature(ambient, embedding, u0, scale, step).scalar)


def gauss_residual(g, surface, x, i, j, step=3e-3):
    """``K_Σ(u_i, u_j) - [K_ambient(u_i, u_j) + μ_i μ_j]`` for principal directions ``u_i, u_j``."""
    frame = shape_operator(g, surface, x)
    try:
        ui = frame.directions[:, i]
        uj = frame.directions[:, j]
    except IndexError:
        raise ValueError("principal index out of range") from None
    if i == j:
        raise ValueError("gauss_residual needs two distinct principal directions")
    patch = local_graph_chart(surface, x)
    intr = intrinsic_curvature(g, patch, patch.params_of(x), g.scale, step)
    k_surf = float(intr.sectional(patch.pullback(ui), patch.pullback(uj)))
    k_amb = float(sectional(g, x, ui, uj))
    return k_surf - (k_amb + frame.principal[i] * frame.principal[j])


def mean_curvature_area_oracle(g, surface, x, step=1e-3):
    """Mean curvature as the rate of change of the area element under the unit normal variation."""
    x = np.asarray(x, dtype=float)
    patch = local_graph_chart(surface, x)
    y0 = patch.params_of(x)
    k = y0.size
    h = step * g.scale

    def log_density(t):
        def emb(Y):
            Q = patch(Y)
            return Q + t * normal_vector(g, surface, Q)

        J = fd_gradient(batched(emb, k), y0, h)
        G = g(emb(y0[None])[0])
        return 0.5 * np.log(np.linalg.det(J @ G @ J.T))

    vals = np.array([log_density(t) for t in np.array([-2.0, -1.0, 1.0, 2.0]) * h])
    return float(np.array([1.0, -8.0, 8.0, -1.0]) @ vals / (12.0 * h))
