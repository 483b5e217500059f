"""Built-in and JSON-described test geometries.

A scenario bundles an ambient metric, named boundary surfaces (``wall1`` is
the tube boundary and the first corner wall, ``wall2``/``wall3`` the other
walls), an anchor point on each surface, an optional edge point on
``wall1 ∩ wall2`` and the closed-form truths known for the geometry.

JSON schema (all lengths in chart units)::

    {
      "name": "my-walls",
      "seed": 0,
      "scale": 1.0,
      "metric": {"family": "flat", "dim": 3, "lower": [-4, -4, -4], "upper": [4, 4, 4]},
      "surfaces": {"wall1": {"family": "plane", "normal": [1, 0, 0]}, ...},
      "anchors": {"wall1": [0, 0, 0], ...},
      "edge": [0, 0, 0],
      "truths": {"H:wall1": 0.0, "pairing": -0.17},
      "control": null
    }

or, for a registry entry, ``{"builtin": "euclidean-ball", "params": {"R": 2}}``.
Truth keys are ``H:<role>`` and ``mu:<role>`` (at the anchor), ``kappa``
(ambient scalar curvature at the first anchor) and ``pairing``
(``<γ_2, γ_1>`` at the edge).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import curvature
from .errors import GeometryError, ScenarioError
from .hypersurface import build_surface, local_graph_chart, normal_vector, shape_operator
from .metrics import _monomials, build_metric

SELF_TEST_TOL = 1e-6
ROLES = ("wall1", "wall2", "wall3")


@dataclass(frozen=True, eq=False)
class Scenario:
    name: str
    metric: object
    surfaces: dict
    anchors: dict
    truths: dict = field(default_factory=dict)
    scale: float = 1.0
    seed: int = 0
    edge: np.ndarray = None
    control: str = None
    params: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.metric.dim

    @property
    def has_corner(self):
        return self.edge is not None and "wall2" in self.surfaces

    @property
    def pairing(self):
        """``<γ_2, γ_1>`` at the edge point."""
        g, e = self.metric, self.edge
        n1 = normal_vector(g, self.surfaces["wall1"], e)
        n2 = normal_vector(g, self.surfaces["wall2"], e)
        return float(n1 @ g(e) @ n2)

    def to_dict(self):
        m = dict(self.metric.spec)
        m["lower"] = self.metric.lower.tolist()
        m["upper"] = self.metric.upper.tolist()
        return {
            "name": self.name,
            "seed": self.seed,
            "scale": self.scale,
            "params": dict(self.params),
            "metric": m,
            "surfaces": {k: dict(s.spec) for k, s in self.surfaces.items()},
            "anchors": {k: np.asarray(a).tolist() for k, a in self.anchors.items()},
            "edge": None if self.edge is None else np.asarray(self.edge).tolist(),
            "truths": dict(self.truths),
            "control": self.control,
        }

    def sample_points(self, role="wall1", count=5, seed=None, radius=0.1):
        """Seeded surface points within ``radius·scale`` (graph coordinates) of the anchor."""
        rng = np.random.default_rng(self.seed if seed is None else seed)
        return sample_surface_points(self.surfaces[role], self.anchors[role], count, rng,
                                     radius * self.scale)

    def self_test(self, tol=SELF_TEST_TOL):
        """Compare declared truths against computed values; returns a list of mismatches."""
        bad = []
        for key, want in sorted(self.truths.items()):
            got = self._evaluate_truth(key)
            if got is None:
                continue
            want_a = np.asarray(want, float)
            got_a = np.asarray(got, float)
            if got_a.shape != want_a.shape or np.any(
                np.abs(got_a - want_a) > tol * np.maximum(1.0, np.abs(want_a))
            ):
                bad.append(f"truth {key!r}: declared {want}, computed {np.round(got_a, 10).tolist()}")
        return bad

    def _evaluate_truth(self, key):
        g = self.metric
        if key.startswith(("H:", "mu:")):
            kind, role = key.split(":", 1)
            frame = shape_operator(g, self.surfaces[role], self.anchors[role])
            return frame.mean if kind == "H" else np.sort(frame.principal)
        if key == "kappa":
            x = next(iter(self.anchors.values()), 0.5 * (g.lower + g.upper))
            return float(curvature(g, x).scalar)
        if key == "pairing":
            return self.pairing
        return None


def sample_surface_points(surface, anchor, count, rng, radius):
    patch = local_graph_chart(surface, anchor)
    y0 = patch.params_of(anchor)
    y = y0 + rng.uniform(-radius, radius, size=(count, y0.size))
    return patch(y)


# --------------------------------------------------------------------------------------
# registry


def _flat_spec(n, lo, hi):
    return {"family": "flat", "dim": n, "lower": lo, "upper": hi}


def _check_angle(alpha_deg, issues):
    if not 0.0 < alpha_deg < 180.0:
        issues.append(f"interior angle alpha={alpha_deg} must lie in (0, 180) degrees")


def _check_dim(n, issues, minimum=2):
    if not isinstance(n, int) or n < minimum:
        issues.append(f"dimension n={n!r} must be an integer >= {minimum}")


def _check_positive(name, value, issues):
    if not value > 0:
        issues.append(f"{name}={value} must be positive")


def _flat(n=3):
    issues = []
    _check_dim(n, issues, 1)
    if issues:
        raise ScenarioError(issues)
    return dict(metric=_flat_spec(n, [-4.0] * n, [4.0] * n), surfaces={}, anchors={},
                truths={"kappa": 0.0} if n >= 2 else {})


def _halfspace_walls(n=3, alpha=80.0):
    issues = []
    _check_dim(n, issues)
    _check_angle(alpha, issues)
    if issues:
        raise ScenarioError(issues)
    a = np.radians(alpha)
    g2 = np.zeros(n)
    g2[0], g2[1] = -np.cos(a), np.sin(a)
    surfaces = {
        "wall1": {"family": "plane", "normal": np.eye(n)[0].tolist()},
        "wall2": {"family": "plane", "normal": g2.tolist()},
    }
    zero = [0.0] * n
    anchors = {"wall1": zero, "wall2": zero}
    truths = {"H:wall1": 0.0, "H:wall2": 0.0, "kappa": 0.0, "pairing": -np.cos(a)}
    if n >= 3:
        g3 = np.zeros(n)
        g3[0], g3[1], g3[2] = -np.cos(a), -np.cos(a), 1.0
        surfaces["wall3"] = {"family": "plane", "normal": (g3 / np.linalg.norm(g3)).tolist()}
        anchors["wall3"] = zero
        truths["H:wall3"] = 0.0
    return dict(metric=_flat_spec(n, [-4.0] * n, [4.0] * n), surfaces=surfaces, anchors=anchors,
                truths=truths, edge=zero, control="obtuse" if alpha > 90.0 else None)


def _ball(n=3, R=1.0, orientation="outward"):
    issues = []
    _check_dim(n, issues)
    _check_positive("R", R, issues)
    if orientation not in ("outward", "inward"):
        issues.append("orientation must be 'outward' (X is the ball) or 'inward' (X is its complement)")
    if issues:
        raise ScenarioError(issues)
    sign = 1 if orientation == "outward" else -1
    anchor = (R * np.ones(n) / np.sqrt(n)).tolist()
    ext = 4.0 * R
    return dict(
        metric=_flat_spec(n, [-ext] * n, [ext] * n),
        surfaces={"wall1": {"family": "sphere", "center": [0.0] * n, "radius": R, "outward": sign}},
        anchors={"wall1": anchor},
        truths={"H:wall1": sign * (n - 1) / R, "mu:wall1": [sign / R] * (n - 1), "kappa": 0.0},
        scale=R,
        control=None if sign > 0 else "negative-H",
    )


def _sphere_wall_pair(n=3, R1=1.0, R2=1.0, alpha=80.0):
    issues = []
    _check_dim(n, issues)
    _check_positive("R1", R1, issues)
    _check_positive("R2", R2, issues)
    _check_angle(alpha, issues)
    if issues:
        raise ScenarioError(issues)
    a = np.radians(alpha)
    d = np.sqrt(R1**2 + R2**2 + 2 * R1 * R2 * np.cos(a))
    x1 = (R1**2 - R2**2 + d**2) / (2 * d)
    rho = np.sqrt(max(R1**2 - x1**2, 0.0))
    if rho < 1e-9 * R1:
        raise ScenarioError("spheres do not intersect transversally for these parameters")
    edge = np.zeros(n)
    edge[0], edge[1] = x1, rho
    c2 = np.zeros(n)
    c2[0] = d
    scale = max(R1, R2)
    lo = [-R1 - 2 * scale] * n
    hi = [d + R2 + 2 * scale] + [R1 + 2 * scale] * (n - 1)
    return dict(
        metric=_flat_spec(n, lo, hi),
        surfaces={
            "wall1": {"family": "sphere", "center": [0.0] * n, "radius": R1},
            "wall2": {"family": "sphere", "center": c2.tolist(), "radius": R2},
        },
        anchors={"wall1": edge.tolist(), "wall2": edge.tolist()},
        truths={"H:wall1": (n - 1) / R1, "H:wall2": (n - 1) / R2, "kappa": 0.0,
                "pairing": -np.cos(a)},
        edge=edge.tolist(),
        scale=scale,
        control="obtuse" if alpha > 90.0 else None,
    )


def _round_sphere_cap(r=1.0, n=3, rho=None):
    issues = []
    _check_dim(n, issues)
    _check_positive("r", r, issues)
    rho = np.pi * r / 4.0 if rho is None else float(rho)
    if not 0.0 < rho < np.pi * r / 2.0:
        issues.append("cap radius rho must lie in (0, pi*r/2) so that the cap is mean convex")
    if issues:
        raise ScenarioError(issues)
    c = 2.0 * r * np.tan(rho / (2.0 * r))
    mu = 1.0 / (r * np.tan(rho / r))
    anchor = np.zeros(n)
    anchor[0] = c
    return dict(
        metric={"family": "round-sphere", "dim": n, "radius": r, "scale": r,
                "lower": [-4.0 * r] * n, "upper": [4.0 * r] * n},
        surfaces={"wall1": {"family": "sphere", "center": [0.0] * n, "radius": c}},
        anchors={"wall1": anchor.tolist()},
        truths={"H:wall1": (n - 1) * mu, "mu:wall1": [mu] * (n - 1),
                "kappa": n * (n - 1) / r**2},
        scale=r,
    )


def perturbation_terms(dim, amplitude, seed, length, degree=3):
    """Seeded polynomial ``φ`` with ``|φ| ≤ amplitude`` on the box ``|x_i| ≤ length``."""
    rng = np.random.default_rng(seed)
    monos = [e for e in _monomials(dim, degree) if sum(e) > 0]
    coeffs = rng.uniform(-1.0, 1.0, size=len(monos)) * amplitude / len(monos)
    return [[float(c), list(e)] for c, e in zip(coeffs, monos)], float(length)


def _conformal_perturbed(base="euclidean-ball", amplitude=0.05, seed=7, **base_params):
    if base == "flat":
        base = "euclidean-ball"
    if base == "conformal-perturbed" or base not in _REGISTRY:
        raise ScenarioError(f"unknown base scenario {base!r} for conformal-perturbed")
    if not amplitude >= 0:
        raise ScenarioError(f"amplitude={amplitude} must be nonnegative")
    desc = _REGISTRY[base](**base_params)
    if desc["metric"]["family"] != "flat":
        raise ScenarioError("conformal-perturbed needs a flat base scenario")
    n = desc["metric"]["dim"]
    scale = desc.get("scale", 1.0)
    terms, length = perturbation_terms(n, amplitude, seed, 2.0 * scale)
    desc["metric"] = {"family": "conformal", "dim": n, "terms": terms, "length": length,
                      "scale": scale,
                      "lower": desc["metric"]["lower"], "upper": desc["metric"]["upper"]}
    # conformal changes keep angles, so only the wall pairing survives as a truth
    desc["truths"] = {k: v for k, v in desc["truths"].items() if k == "pairing"}
    desc["seed"] = seed
    return desc


_REGISTRY = {
    "flat": _flat,
    "euclidean-halfspace-walls": _halfspace_walls,
    "euclidean-ball": _ball,
    "sphere-wall-pair": _sphere_wall_pair,
    "conformal-perturbed": _conformal_perturbed,
    "round-sphere-cap": _round_sphere_cap,
}

# default instances exercised by the CLI and the acceptance suite
BUILTIN_DEFAULTS = (
    ("euclidean-halfspace-walls", {"n": 3, "alpha": 80.0}),
    ("euclidean-ball", {"n": 3, "R": 1.0}),
    ("sphere-wall-pair", {"n": 3, "R1": 1.0, "R2": 1.0, "alpha": 80.0}),
    ("conformal-perturbed", {"base": "sphere-wall-pair", "amplitude": 0.05, "seed": 7}),
    ("round-sphere-cap", {"r": 1.0, "n": 3}),
)


def registry_names():
    return sorted(_REGISTRY)


def builtin(name, params=None, self_test=True):
    """Instantiate a registry entry; ``params`` override the defaults."""
    if name not in _REGISTRY:
        raise ScenarioError(f"unknown scenario {name!r}; known: {', '.join(registry_names())}")
    params = dict(params or {})
    try:
        desc = _REGISTRY[name](**params)
    except TypeError as exc:
        raise ScenarioError(f"invalid parameters for {name!r}: {exc}") from None
    desc.setdefault("scale", 1.0)
    desc["name"] = name
    desc["params"] = params
    desc.setdefault("seed", int(params.get("seed", 0)))
    return from_dict(desc, self_test=self_test)


def _validate(d):
    issues = []
    if not isinstance(d, dict):
        return ["scenario description must be a JSON object"]
    for key in ("name", "metric", "surfaces"):
        if key not in d:
            issues.append(f"missing required field {key!r}")
    if "name" in d and not isinstance(d["name"], str):
        issues.append("field 'name' must be a string")
    metric = d.get("metric")
    n = None
    if metric is not None:
        if not isinstance(metric, dict):
            issues.append("field 'metric' must be an object")
        else:
            n = metric.get("dim")
            if not isinstance(n, int) or n < 1:
                issues.append("field 'metric.dim' must be a positive integer")
                n = None
            if "family" not in metric:
                issues.append("missing required field 'metric.family'")
            for b in ("lower", "upper"):
                if b in metric and n is not None and np.size(metric[b]) not in (1, n):
                    issues.append(f"field 'metric.{b}' must have {n} entries")
    surfaces = d.get("surfaces", {})
    if not isinstance(surfaces, dict):
        issues.append("field 'surfaces' must map roles to surface objects")
        surfaces = {}
    anchors = d.get("anchors", {})
    if not isinstance(anchors, dict):
        issues.append("field 'anchors' must map roles to points")
        anchors = {}
    for role, s in surfaces.items():
        if role not in ROLES:
            issues.append(f"unknown surface role {role!r} (expected one of {', '.join(ROLES)})")
        if not isinstance(s, dict) or "family" not in s:
            issues.append(f"missing required field 'surfaces.{role}.family'")
        if role not in anchors:
            issues.append(f"missing required field 'anchors.{role}'")
        elif n is not None and np.size(anchors[role]) != n:
            issues.append(f"field 'anchors.{role}' must have {n} entries")
    if "wall2" in surfaces and "wall1" not in surfaces:
        issues.append("role 'wall2' requires 'wall1'")
    edge = d.get("edge")
    if edge is not None and n is not None and np.size(edge) != n:
        issues.append(f"field 'edge' must have {n} entries")
    if "scale" in d and not (isinstance(d["scale"], (int, float)) and d["scale"] > 0):
        issues.append("field 'scale' must be a positive number")
    if not isinstance(d.get("truths", {}), dict):
        issues.append("field 'truths' must be an object")
    return issues


def from_dict(d, self_test=True):
    issues = _validate(d)
    if issues:
        raise ScenarioError(issues)
    scale = float(d.get("scale", 1.0))
    mspec = dict(d["metric"])
    lower, upper = mspec.pop("lower", None), mspec.pop("upper", None)
    metric = build_metric(mspec, lower, upper, scale=scale)
    surfaces, anchors = {}, {}
    for role in sorted(d["surfaces"]):
        try:
            surfaces[role] = build_surface(d["surfaces"][role])
        except ScenarioError as exc:
            issues.extend(f"surfaces.{role}: {msg}" for msg in exc.issues)
            continue
        anchors[role] = np.asarray(d["anchors"][role], float)
        resid = abs(float(surfaces[role].value(anchors[role])))
        if resid > 1e-10 * max(1.0, scale**2):
            issues.append(f"anchors.{role} is not on the surface (|f| = {resid:.3g})")
        elif not metric.contains(anchors[role]):
            issues.append(f"anchors.{role} lies outside the metric domain")
    edge = d.get("edge")
    if edge is not None:
        edge = np.asarray(edge, float)
        for role in ("wall1", "wall2"):
            if role in surfaces and abs(float(surfaces[role].value(edge))) > 1e-10 * max(1.0, scale**2):
                issues.append(f"edge point is not on {role}")
    if issues:
        raise ScenarioError(issues)
    sc = Scenario(
        name=d["name"], metric=metric, surfaces=surfaces, anchors=anchors,
        truths=_plain(d.get("truths", {})), scale=scale, seed=int(d.get("seed", 0)),
        edge=edge, control=d.get("control"), params=dict(d.get("params", {})),
    )
    if sc.has_corner and abs(sc.pairing) > 1.0 - 1e-6:
        raise ScenarioError("walls are not transverse at the edge point")
    if self_test:
        try:
            bad = sc.self_test()
        except GeometryError as exc:
            bad = [f"self-test failed: {exc}"]
        if bad:
            raise ScenarioError(bad)
    return sc


def _plain(obj):
    """Builtin Python floats/lists so that truths serialize and compare cleanly."""
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple, np.ndarray)):
        return [_plain(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


def serialize(scenario):
    return json.dumps(scenario.to_dict(), indent=2, sort_keys=True)


def load_scenario(text, self_test=True):
    """Parse a JSON scenario description (full form or ``{"builtin": ..., "params": ...}``)."""
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"JSON parse error at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if isinstance(d, dict) and "builtin" in d:
        params = d.get("params", {})
        if not isinstance(params, dict):
            raise ScenarioError("field 'params' must be an object")
        return builtin(d["builtin"], params, self_test)
    return from_dict(d, self_test)


def parse_selector(text):
    """``name`` or ``name:key=value,key=value`` (values parsed as JSON where possible)."""
    name, _, rest = text.partition(":")
    params = {}
    for item in filter(None, rest.split(",")):
        key, eq, val = item.partition("=")
        if not eq:
            raise ScenarioError(f"malformed scenario parameter {item!r} (expected key=value)")
        try:
            params[key.strip()] = json.loads(val)
        except json.JSONDecodeError:
            params[key.strip()] = val.strip()
    return builtin(name.strip(), params)


def default_scenarios():
    return [builtin(name, params) for name, params in BUILTIN_DEFAULTS]
