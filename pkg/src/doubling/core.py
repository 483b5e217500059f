"""Chart-based Riemannian tensor calculus.

Everything here works on batches: a point array of shape ``(..., n)`` yields
tensors with the same leading shape.  Sign convention for curvature::

    R^a_{bcd} = ∂_c Γ^a_{db} - ∂_d Γ^a_{cb} + Γ^a_{ce} Γ^e_{db} - Γ^a_{de} Γ^e_{cb}
    Ric_{bd} = R^a_{bad},     κ = g^{bd} Ric_{bd},
    K(u, v) = R_{abcd} u^a v^b u^c v^d / (|u|²|v|² - <u,v>²)

so round spheres have K > 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dual import Dual, pad_block
from .errors import DegeneratePlaneError, DomainError, DomainExitError

# 5-point central stencil for the first derivative (4th order).
_NODES = np.array([-2.0, -1.0, 1.0, 2.0])
_WEIGHTS = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0

GEODESIC_STEP = 1e-3


def fd_gradient(func, x, h):
    """Central 4th-order derivative of ``func`` at ``x``.

    ``func`` maps ``(..., n)`` to ``(..., *out)``; the result has shape
    ``(..., n, *out)`` with the derivative index first.
    """
    x = np.asarray(x, dtype=float)
    n = x.shape[-1]
    lead = x.ndim - 1
    offsets = _NODES[:, None, None] * np.eye(n)[None] * h
    F = np.asarray(func(x[..., None, None, :] + offsets))
    F = np.moveaxis(F, lead, 0)
    return np.tensordot(_WEIGHTS, F, axes=1) / h


@dataclass(frozen=True, eq=False)
class MetricField:
    """A smooth SPD matrix field ``g`` on a box-shaped chart domain.

    ``g`` maps points ``(..., n)`` to ``(..., n, n)``.  When ``liftable`` is
    true it must also accept a :class:`~doubling.dual.Dual` argument, which
    enables exact first derivatives.  Finite-difference steps are fractions
    of ``scale``.
    """

    dim: int
    g: object
    lower: np.ndarray
    upper: np.ndarray
    scale: float = 1.0
    liftable: bool = False
    fd_step: float = 1e-4
    curv_step: float = 1e-3
    name: str = ""
    spec: dict = field(default=None, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "lower", np.broadcast_to(np.asarray(self.lower, float), (self.dim,)).copy())
        object.__setattr__(self, "upper", np.broadcast_to(np.asarray(self.upper, float), (self.dim,)).copy())

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        G = self.g(x)
        if isinstance(G, Dual):
            G = G.val
        return np.broadcast_to(G, x.shape[:-1] + (self.dim, self.dim))

    def with_steps(self, fd_step=None, curv_step=None):
        return MetricField(
            self.dim, self.g, self.lower, self.upper, self.scale, self.liftable,
            self.fd_step if fd_step is None else fd_step,
            self.curv_step if curv_step is None else curv_step,
            self.name, self.spec,
        )

    def contains(self, x, margin=0.0):
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lower + margin) & (x <= self.upper - margin), axis=-1)

    def require_interior(self, x, margin):
        if not np.all(self.contains(x, margin)):
            raise DomainError(
                f"point too close to the boundary of chart {self.name or '<metric>'} "
                f"(required margin {margin:g})"
            )

    def inner(self, x, u, v):
        return np.einsum("...i,...ij,...j->...", u, self(x), v)

    def norm(self, x, v):
        return np.sqrt(self.inner(x, v, v))


@dataclass(frozen=True)
class ProductPoint:
    """A point ``(x, t)`` of the product ``X̄ × ℝ``."""

    base: np.ndarray
    t: float

    def coords(self):
        return np.append(np.asarray(self.base, float), self.t)


def metric_derivatives(field, x, backend="auto"):
    """``dg[..., k, i, j] = ∂_k g_ij`` by forward-mode duals or finite differences."""
    x = np.asarray(x, dtype=float)
    if backend == "auto":
        backend = "dual" if field.liftable else "fd"
    if backend == "dual":
        G = field.g(Dual.seed(x))
        if not isinstance(G, Dual):
            return np.zeros(x.shape[:-1] + (field.dim,) * 3)
        dg = np.moveaxis(G.eps, -1, -3)
        return np.broadcast_to(dg, x.shape[:-1] + (field.dim,) * 3)
    if backend == "fd":
        return fd_gradient(field, x, field.fd_step * field.scale)
    raise ValueError(f"unknown derivative backend {backend!r}")


def _christoffel(field, x, backend="auto"):
    G = field(x)
    dg = metric_derivatives(field, x, backend)
    ginv = np.linalg.inv(G)
    # term[l, i, j] = ∂_i g_jl + ∂_j g_il - ∂_l g_ij
    term = np.einsum("...ijl->...lij", dg) + np.einsum("...jil->...lij", dg) - dg
    gam = 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)
    return 0.5 * (gam + np.swapaxes(gam, -1, -2))


def christoffel(field, x, backend="auto"):
    """Levi-Civita symbols ``Γ[..., k, i, j] = Γ^k_ij``, symmetric in ``(i, j)``."""
    x = np.asarray(x, dtype=float)
    margin = 2.0 * field.fd_step * field.scale
    field.require_interior(x, margin)
    return _christoffel(field, x, backend)


@dataclass(frozen=True)
class Curvature:
    """Curvature tensors at one point (or a batch of points)."""

    metric: np.ndarray
    christoffel: np.ndarray
    riemann: np.ndarray  # R^a_{bcd}
    ricci: np.ndarray
    scalar: np.ndarray

    @property
    def riemann_lower(self):
        return np.einsum("...ae,...ebcd->...abcd", self.metric, self.riemann)

    def sectional(self, u, v):
        u = np.asarray(u, dtype=float)
        v = np.asarray(v, dtype=float)
        G = self.metric
        uu = np.einsum("...i,...ij,...j->...", u, G, u)
        vv = np.einsum("...i,...ij,...j->...", v, G, v)
        uv = np.einsum("...i,...ij,...j->...", u, G, v)
        denom = uu * vv - uv**2
        if np.any(denom <= 1e-14 * uu * vv):
            raise DegeneratePlaneError("tangent vectors are (nearly) parallel")
        num = np.einsum("...abcd,...a,...b,...c,...d->...", self.riemann_lower, u, v, u, v)
        return num / denom


def curvature(field, x, backend="auto"):
    """Riemann, Ricci and scalar curvature; ``∂Γ`` by a 4th-order stencil of step ``curv_step·scale``."""
    x = np.asarray(x, dtype=float)
    h = field.curv_step * field.scale
    field.require_interior(x, 2.0 * h + 2.0 * field.fd_step * field.scale)
    gam = _christoffel(field, x, backend)
    dgam = fd_gradient(lambda y: _christoffel(field, y, backend), x, h)  # [..., c, a, d, b]
    riem = (
        np.einsum("...cadb->...abcd", dgam)
        - np.einsum("...dacb->...abcd", dgam)
        + np.einsum("...ace,...edb->...abcd", gam, gam)
        - np.einsum("...ade,...ecb->...abcd", gam, gam)
    )
    ric = np.einsum("...abad->...bd", riem)
    G = field(x)
    scal = np.einsum("...bd,...bd->...", np.linalg.inv(G), ric)
    return Curvature(G, gam, riem, ric, scal)


def sectional(field, x, u, v, backend="auto"):
    return curvature(field, x, backend).sectional(u, v)


def geodesic_acceleration(field, x, v, backend="auto"):
    gam = _christoffel(field, x, backend)
    return -np.einsum("...kij,...i,...j->...k", gam, v, v)


def geodesic_flow(field, x0, v0, s, step=GEODESIC_STEP, backend="auto"):
    """Follow the geodesic from ``x0`` with velocity ``v0`` for arclength ``s``.

    Classical RK4 with ``ceil(|s| / (step·scale))`` equal steps per trajectory;
    negative ``s`` runs backwards.  Works on batches, each trajectory keeping
    its own step count.  Returns ``(x, v)``.
    """
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    s = np.broadcast_to(np.asarray(s, dtype=float), x.shape[:-1]).copy()
    nsteps = np.ceil(np.abs(s) / (step * field.scale) - 1e-12).astype(int)
    nsteps = np.maximum(nsteps, 0)
    h = np.where(nsteps > 0, s / np.maximum(nsteps, 1), 0.0)[..., None]

    def acc(xx, vv):
        return geodesic_acceleration(field, xx, vv, backend)

    for k in range(int(nsteps.max(initial=0))):
        active = (k < nsteps)[..., None]
        k1x, k1v = v, acc(x, v)
        k2x, k2v = v + 0.5 * h * k1v, acc(x + 0.5 * h * k1x, v + 0.5 * h * k1v)
        k3x, k3v = v + 0.5 * h * k2v, acc(x + 0.5 * h * k2x, v + 0.5 * h * k2v)
        k4x, k4v = v + h * k3v, acc(x + h * k3x, v + h * k3v)
        xn = x + h / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        vn = v + h / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
        x = np.where(active, xn, x)
        v = np.where(active, vn, v)
        inside = field.contains(x)
        if not np.all(inside | ~active[..., 0]):
            bad = np.argwhere(~inside & active[..., 0])[0]
            s_exit = float((k + 1) * h[tuple(bad)][0])
            raise DomainExitError(f"geodesic left the chart at arclength {s_exit:g}", s_exit)
    return x, v


class _ProductG:
    def __init__(self, base):
        self.base = base

    def __call__(self, x):
        n = self.base.dim
        return pad_block(self.base.g(x[..., :n]))


def product_metric(field, t_extent=None):
    """``diag(g, 1)`` on ``X̄ × ℝ``; the ``t`` axis gets a wide domain."""
    T = 1e3 * field.scale if t_extent is None else t_extent
    return MetricField(
        field.dim + 1,
        _ProductG(field),
        np.append(field.lower, -T),
        np.append(field.upper, T),
        field.scale,
        field.liftable,
        field.fd_step,
        field.curv_step,
        f"{field.name}×R",
    )


def gram_schmidt(G, vectors):
    """Orthonormalize the columns of ``vectors`` with respect to ``G``; drops dependent ones."""
    out = []
    for v in np.asarray(vectors, dtype=float).T:
        w = v.copy()
        for e in out:
            w = w - (e @ G @ w) * e
        nrm = np.sqrt(w @ G @ w)
        if nrm > 1e-10 * max(1.0, np.sqrt(v @ G @ v)):
            w = w / nrm
            for e in out:  # second pass for stability
                w = w - (e @ G @ w) * e
            out.append(w / np.sqrt(w @ G @ w))
    return np.array(out).T
