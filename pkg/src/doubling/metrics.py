"""Named metric families and their JSON descriptions.

Every family is a small callable class so that metric fields pickle cleanly
and rebuild deterministically from a spec dict such as::

    {"family": "conformal", "dim": 3, "terms": [[0.05, [1, 0, 0]]],
     "base": {"family": "flat", "dim": 3}}
"""

from __future__ import annotations

import numpy as np

from .core import MetricField
from .dual import stack
from .errors import ScenarioError


def _eye(x, n):
    return np.broadcast_to(np.eye(n), np.shape(x.val if hasattr(x, "val") else x)[:-1] + (n, n))


class Polynomial:
    """``Σ c · Π (x_i / scale)^{e_i}`` over a list of ``(c, exponents)`` terms."""

    def __init__(self, terms, scale=1.0):
        self.terms = [(float(c), tuple(int(e) for e in exps)) for c, exps in terms]
        self.scale = float(scale)

    def __call__(self, x):
        y = x / self.scale
        lead = np.shape(y.val if hasattr(y, "val") else y)[:-1]
        acc = np.zeros(lead)
        for c, exps in self.terms:
            mono = c
            for i, e in enumerate(exps):
                if e:
                    mono = mono * y[..., i] ** e
            acc = acc + mono
        return acc

    def to_list(self):
        return [[c, list(e)] for c, e in self.terms]


class Flat:
    def __init__(self, dim):
        self.dim = dim

    def __call__(self, x):
        return _eye(x, self.dim)


class Conformal:
    """``exp(2φ) · g_base`` with ``φ`` a callable scalar field."""

    def __init__(self, dim, phi, base=None):
        self.dim = dim
        self.phi = phi
        self.base = base

    def __call__(self, x):
        factor = np.exp(2.0 * self.phi(x))
        G = _eye(x, self.dim) if self.base is None else self.base(x)
        return factor[..., None, None] * G


class _StereoPhi:
    def __init__(self, radius):
        self.radius = radius

    def __call__(self, x):
        r2 = np.sum(x * x, axis=-1)
        return -np.log(1.0 + r2 / (4.0 * self.radius**2))


class _PoincarePhi:
    def __call__(self, x):
        r2 = np.sum(x * x, axis=-1)
        return np.log(2.0) - np.log(1.0 - r2)


class _PolarG:
    def __call__(self, x):
        r = x[..., 0]
        one = r * 0.0 + 1.0
        zero = r * 0.0
        return stack([stack([one, zero], -1), stack([zero, r * r], -1)], -2)


class PolynomialTable:
    """``g_ij = δ_ij + p_ij(x)`` with one polynomial per upper-triangular entry."""

    def __init__(self, dim, components, scale=1.0):
        self.dim = dim
        self.components = {}
        for key, terms in components.items():
            i, j = (int(s) for s in str(key).split(","))
            i, j = min(i, j), max(i, j)
            self.components[(i, j)] = Polynomial(terms, scale)

    def __call__(self, x):
        n = self.dim
        lead = np.shape(x.val if hasattr(x, "val") else x)[:-1]
        rows = []
        for i in range(n):
            row = []
            for j in range(n):
                key = (min(i, j), max(i, j))
                entry = np.full(lead, 1.0 if i == j else 0.0)
                if key in self.components:
                    entry = entry + self.components[key](x)
                row.append(entry)
            rows.append(stack(row, -1))
        return stack(rows, -2)


def random_polynomial_terms(dim, seed, degree=3, amplitude=1.0):
    """Seeded random polynomial with coefficients in ``[-amplitude, amplitude]``."""
    rng = np.random.default_rng(seed)
    terms = []
    for exps in _monomials(dim, degree):
        if sum(exps) == 0:
            continue
        terms.append([float(amplitude * rng.uniform(-1.0, 1.0)), list(exps)])
    return terms


def _monomials(dim, degree):
    if dim == 0:
        yield ()
        return
    for e in range(degree + 1):
        for rest in _monomials(dim - 1, degree - e):
            yield (e,) + rest


def build_metric(spec, lower=None, upper=None, scale=1.0):
    """Build a :class:`MetricField` from a family spec dict."""
    issues = []
    fam = spec.get("family")
    dim = spec.get("dim")
    if not isinstance(dim, int) or dim < 1:
        issues.append("metric.dim must be a positive integer")
    if issues:
        raise ScenarioError(issues)
    sc = float(spec.get("scale", scale))
    length = float(spec.get("length", sc))  # normalization of polynomial coordinates
    if fam == "flat":
        g = Flat(dim)
    elif fam == "conformal":
        terms = spec.get("terms")
        if terms is None:
            raise ScenarioError("metric.terms is required for the conformal family")
        base = spec.get("base")
        base_g = build_metric(base, scale=sc).g if base is not None else None
        g = Conformal(dim, Polynomial(terms, length), base_g)
    elif fam == "round-sphere":
        r = float(spec.get("radius", 1.0))
        if r <= 0:
            raise ScenarioError("metric.radius must be positive")
        g = Conformal(dim, _StereoPhi(r))
    elif fam == "poincare":
        g = Conformal(dim, _PoincarePhi())
    elif fam == "polar":
        if dim != 2:
            raise ScenarioError("polar metric is two-dimensional")
        g = _PolarG()
    elif fam == "polynomial":
        comps = spec.get("components")
        if not isinstance(comps, dict):
            raise ScenarioError("metric.components must map 'i,j' to term lists")
        g = PolynomialTable(dim, comps, length)
    else:
        raise ScenarioError(f"unknown metric family {fam!r}")
    if lower is None:
        lower = spec.get("lower", -4.0 * sc)
    if upper is None:
        upper = spec.get("upper", 4.0 * sc)
    return MetricField(dim, g, lower, upper, sc, True, name=fam, spec=dict(spec))


# Convenience constructors used by fixtures and docs ---------------------------------


def flat_metric(dim, extent=4.0, scale=1.0):
    return build_metric({"family": "flat", "dim": dim}, -extent * scale, extent * scale, scale)


def round_sphere_metric(radius, dim=2):
    """Stereographic chart of the round sphere, normalized so that ``g(0) = I``."""
    return build_metric({"family": "round-sphere", "dim": dim, "radius": radius},
                        -4.0 * radius, 4.0 * radius, radius)


def poincare_metric(dim=2):
    return build_metric({"family": "poincare", "dim": dim}, -0.6, 0.6, 1.0)


def polar_metric():
    return build_metric({"family": "polar", "dim": 2}, [0.5, -10.0], [10.0, 10.0], 1.0)


def conformal_metric(dim, terms, scale=1.0, extent=4.0, base=None):
    spec = {"family": "conformal", "dim": dim, "terms": terms, "scale": scale}
    if base is not None:
        spec["base"] = base
    return build_metric(spec, -extent * scale, extent * scale, scale)
