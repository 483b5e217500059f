"""Batch verification driver.

Commands::

    doubling check-core     curvature fixtures plus scenario self-tests
    doubling verify-tube    tube curvature: formula vs intrinsic oracle, N' eigenvector, positivity
    doubling verify-corner  corner mean curvature: formula vs oracle, identities, sign checks
    doubling sweep          1/ε coefficient fits for tubes and corners
    doubling report         merge the JSON summaries found in the output directory

Each run writes ``<command>.csv`` (one row per grid point, sorted, floats in
shortest round-trip form) and ``<command>.json`` (invariant table, fits,
errors) into ``--out`` (default ``$DOUBLING_OUT_DIR`` or ``./doubling-out``).
Exit status: 0 all checks pass, 1 some check failed, 2 configuration or
numerical error.  ε values are given in units of each scenario's scale.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from .core import christoffel, curvature
from .corner import CornerGeometry, corner_report, corner_sweep_fit, flat_walls_H
from .errors import GeometryError, ScenarioError
from .hypersurface import shape_operator
from .metrics import flat_metric, poincare_metric, polar_metric, round_sphere_metric
from .scenarios import BUILTIN_DEFAULTS, builtin, load_scenario, parse_selector, serialize
from .tube import (
    TubeGeometry,
    ambient_scalar,
    shape_on_n_prime,
    tube_frame,
    tube_scalar_direct,
    tube_scalar_formula,
    tube_sweep_fit,
)

OUT_ENV = "DOUBLING_OUT_DIR"
COMMANDS = ("check-core", "verify-tube", "verify-corner", "sweep", "report")
THETA_MAX = np.pi / 2 - 0.1

# Default budgets; override with --tol-overrides key=value,...
TOLERANCES = {
    "core_kappa_rel": 1e-6,  # scalar curvature fixtures, relative
    "core_flat_abs": 1e-9,  # |κ| of the Euclidean fixture
    "core_christoffel_abs": 1e-8,  # polar-coordinate Christoffel symbols
    "tube_oracle_rel": 1e-3,  # κ_formula vs κ_direct, relative with floor 1e-3
    "tube_nprime_rel": 1e-4,  # S(N') = N'/ε
    "tube_positivity_eps": 1e-3,  # ε (units of scale) at which κ > 0 is asserted
    "fit_rel": 0.02,  # fitted 1/ε coefficient vs expectation
    "fit_zero_abs": 1e-6,  # |a| when the expected coefficient vanishes
    "fit_ratio_rel": 0.02,  # a(π/3) / a(0) = 1/2
    "corner_oracle_rel": 1e-3,  # H_formula vs H_direct, relative with floor 1e-3
    "corner_closed_abs": 1e-4,  # flat walls vs closed form
    "corner_identity": 1e-10,  # |n|² and 1 - C identities
    "corner_positivity_eps": 1e-3,  # ε (units of scale) at which H_p̃ > 0 is asserted
}

DEFAULT_EPS = {
    "verify-tube": [1e-2, 5e-3, 2e-3, 1e-3],
    "verify-corner": [1e-2, 1e-3],
    "sweep": [1e-2, 5e-3, 2e-3, 1e-3],
}
DEFAULT_THETA = {
    "verify-tube": np.linspace(-THETA_MAX, THETA_MAX, 5).tolist(),
    "verify-corner": np.linspace(-THETA_MAX, THETA_MAX, 7).tolist(),
    "sweep": [0.0, np.pi / 6, np.pi / 3],
}
MAX_REPLAY = 20


class ConfigError(Exception):
    pass


# --------------------------------------------------------------------------------------
# formatting


def fmt(x):
    """Deterministic cell text: shortest round-trip floats, ``;``-joined sequences."""
    if isinstance(x, (list, tuple, np.ndarray)):
        return ";".join(fmt(v) for v in np.asarray(x).ravel().tolist())
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return repr(float(x))
    if x is None:
        return ""
    return str(x)


def write_csv(path, columns, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue())


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in np.asarray(x, dtype=object).ravel().tolist()] if isinstance(
            x, np.ndarray) else [_jsonable(v) for v in x]
    if isinstance(x, np.bool_):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else repr(x)
    return x


# --------------------------------------------------------------------------------------
# worker tasks (module level so that they pickle)

_SCENARIO_CACHE = {}


def _scenario(text):
    sc = _SCENARIO_CACHE.get(text)
    if sc is None:
        sc = load_scenario(text, self_test=False)
        _SCENARIO_CACHE[text] = sc
    return sc


def _guard(fn):
    def run(task):
        try:
            row = fn(task)
            row.setdefault("status", "ok")
            return row
        except Exception as exc:  # recorded per row; the run still flushes everything else
            row = {k: v for k, v in task.items() if k != "scenario_text"}
            row.update(status="error", message=f"{type(exc).__name__}: {exc}")
            return row
    run.__name__ = fn.__name__
    return run


def _tube_task(task):
    sc = _scenario(task["scenario_text"])
    eps = task["eps"] * sc.scale
    T = TubeGeometry(sc.metric, sc.surfaces["wall1"], eps)
    q = np.asarray(task["q"], float)
    th = task["theta"]
    frame = tube_frame(T, q, th)
    kf = tube_scalar_formula(T, q, th, frame)
    kd = tube_scalar_direct(T, q, th)
    SNp, _ = shape_on_n_prime(T, q, th)
    Gt = np.zeros((sc.dim + 1,) * 2)
    Gt[: sc.dim, : sc.dim] = sc.metric(frame.point.base)
    Gt[-1, -1] = 1.0
    diff = SNp - frame.N_prime / eps
    nprime = float(np.sqrt(diff @ Gt @ diff) * eps)
    unit = max(abs(frame.N @ Gt @ frame.N - 1), abs(frame.N @ Gt @ frame.N_prime),
               abs(frame.N_prime @ Gt @ frame.N_prime - 1))
    return {
        "scenario": task["scenario"], "q_index": task["q_index"], "q": q, "theta": th,
        "eps": eps, "kappa_formula": kf, "kappa_direct": kd, "lambdas": frame.lambdas,
        "H_q": shape_operator(sc.metric, T.inner, q).mean, "kappa_X": ambient_scalar(sc.metric, q),
        "nprime_residual": nprime, "frame_residual": float(unit),
    }


def _corner_task(task):
    sc = _scenario(task["scenario_text"])
    geo = CornerGeometry(sc.metric, sc.surfaces["wall1"], sc.surfaces["wall2"], sc.edge,
                         sc.surfaces.get("wall3"))
    eps = task["eps"] * sc.scale
    rep = corner_report(geo.frame(task["theta"], eps))
    row = {"scenario": task["scenario"], "alpha": float(np.degrees(np.arccos(-sc.pairing)))}
    row.update({k: getattr(rep, k) for k in CORNER_VALUES})
    row["theta"], row["eps"] = task["theta"], eps
    if sc.metric.name == "flat" and all(sc.surfaces[w].name == "plane" for w in ("wall1", "wall2")):
        row["H_closed"] = float(flat_walls_H(np.radians(row["alpha"]), task["theta"], eps))
    return row


def _sweep_task(task):
    sc = _scenario(task["scenario_text"])
    eps = [e * sc.scale for e in task["eps"]]
    th = task["theta"]
    if task["kind"] == "tube":
        fit = tube_sweep_fit(TubeGeometry(sc.metric, sc.surfaces["wall1"], eps[0]), eps,
                             sc.anchors["wall1"], th)
    else:
        geo = CornerGeometry(sc.metric, sc.surfaces["wall1"], sc.surfaces["wall2"], sc.edge)
        fit = corner_sweep_fit(geo, eps, th)
    return {
        "scenario": task["scenario"], "kind": task["kind"], "theta": th, "a": fit.a, "b": fit.b,
        "residual": fit.residual, "expected_a": fit.expected_a,
        "relative_error": fit.relative_error, "eps_list": eps, "values": list(fit.values),
    }


TASKS = {"verify-tube": _guard(_tube_task), "verify-corner": _guard(_corner_task),
         "sweep": _guard(_sweep_task)}


def _run_task(item):
    command, task = item
    return TASKS[command](task)


CORNER_VALUES = ("term1", "term1_trace", "term1_normal_part", "term2", "C", "nprime_component",
                 "norm_n", "H_formula", "H_trace_form", "H_direct", "H_p", "pairing", "M",
                 "M_bound", "dihedral", "dihedral_closed", "dihedral_base")

COLUMNS = {
    "check-core": ["scenario", "fixture", "point", "expected", "computed", "error", "passed"],
    "verify-tube": ["scenario", "q_index", "q", "theta", "eps", "kappa_formula", "kappa_direct",
                    "lambdas", "H_q", "kappa_X", "nprime_residual", "frame_residual", "status",
                    "message"],
    "verify-corner": ["scenario", "alpha", "theta", "eps", *CORNER_VALUES, "H_closed", "status",
                      "message"],
    "sweep": ["scenario", "kind", "theta", "a", "b", "residual", "expected_a", "relative_error",
              "eps_list", "values", "status", "message"],
}
SORT_KEYS = {
    "check-core": ("scenario", "fixture", "point"),
    "verify-tube": ("scenario", "q_index", "eps", "theta"),
    "verify-corner": ("scenario", "eps", "theta"),
    "sweep": ("scenario", "kind", "theta"),
}


def _sort_key(command):
    keys = SORT_KEYS[command]

    def key(row):
        return tuple(fmt(row.get(k)) if isinstance(row.get(k), (str, list, np.ndarray))
                     else (row.get(k) if row.get(k) is not None else 0) for k in keys)
    return key


# --------------------------------------------------------------------------------------
# invariants


class Invariants:
    def __init__(self):
        self.items = {}

    def check(self, name, scenario, ok, inputs, value=None, expected_fail=False):
        key = (name, scenario)
        ent = self.items.setdefault(key, {
            "name": name, "scenario": scenario, "checked": 0, "violations": 0,
            "expected_fail": expected_fail, "worst": None, "failures": [],
        })
        ent["checked"] += 1
        if value is not None and np.isfinite(value):
            ent["worst"] = value if ent["worst"] is None else max(ent["worst"], value)
        if not ok:
            ent["violations"] += 1
            if len(ent["failures"]) < MAX_REPLAY:
                ent["failures"].append(_jsonable(inputs))

    def table(self):
        out = []
        for key in sorted(self.items):
            ent = dict(self.items[key])
            if ent["expected_fail"]:
                # discrimination controls pass when the inequality visibly breaks
                ent["passed"] = ent["violations"] > 0
            else:
                ent["passed"] = ent["violations"] == 0
            out.append(ent)
        return out


def _replay(row, *keys):
    return {k: row.get(k) for k in ("scenario", *keys)}


def _tube_invariants(rows, scenarios, tol, inv):
    for r in rows:
        if r.get("status") != "ok":
            continue
        key = r["scenario"]
        sc = scenarios[key]
        kf, kd = r["kappa_formula"], r["kappa_direct"]
        rel = abs(kf - kd) / max(abs(kf), 1.0)
        inv.check("tube_formula_vs_direct", key, rel <= tol["tube_oracle_rel"],
                  _replay(r, "q", "theta", "eps"), rel)
        inv.check("tube_nprime_eigenvector", key, r["nprime_residual"] <= tol["tube_nprime_rel"],
                  _replay(r, "q", "theta", "eps"), r["nprime_residual"])
        inv.check("tube_frame_orthonormal", key, r["frame_residual"] <= 1e-10,
                  _replay(r, "q", "theta", "eps"), r["frame_residual"])
        if r["eps"] <= tol["tube_positivity_eps"] * sc.scale * (1 + 1e-9) and r["kappa_X"] >= -1e-9:
            if r["H_q"] > 0:
                inv.check("tube_positivity", key, r["kappa_formula"] > 0,
                          _replay(r, "q", "theta", "eps"), None)
            elif r["H_q"] < 0:
                inv.check("tube_positivity", key, r["kappa_formula"] > 0,
                          _replay(r, "q", "theta", "eps"), None, expected_fail=True)


def _corner_invariants(rows, scenarios, tol, inv):
    for r in rows:
        if r.get("status") != "ok":
            continue
        key = r["scenario"]
        sc = scenarios[key]
        where = _replay(r, "theta", "eps")
        d = abs(r["H_formula"] - r["H_direct"])
        inv.check("corner_formula_vs_direct", key,
                  d <= max(tol["corner_oracle_rel"] * abs(r["H_direct"]), tol["corner_oracle_rel"]),
                  where, d / max(abs(r["H_direct"]), 1.0))
        if r.get("H_closed") is not None:
            e = abs(r["H_direct"] - r["H_closed"])
            inv.check("corner_closed_form", key, e <= tol["corner_closed_abs"], where, e)
        c2 = np.cos(r["theta"]) ** 2
        e = abs(r["norm_n"] ** 2 + c2 * r["pairing"] ** 2 - 1)
        inv.check("corner_norm_identity", key, e <= tol["corner_identity"], where, e)
        e = abs(1 - r["C"] - r["nprime_component"] ** 2)
        inv.check("corner_C_identity", key, e <= tol["corner_identity"] and 0 < r["C"] <= 1,
                  where, e)
        inv.check("corner_M_bound", key, abs(r["M"]) <= r["M_bound"], where,
                  abs(r["M"]) / r["M_bound"])
        e = abs(r["term1"] - r["term1_trace"])
        inv.check("corner_term1_two_routes", key, e <= 1e-6, where, e)
        if r.get("dihedral") is not None and np.isfinite(r["dihedral"]):
            e = abs(r["dihedral"] - r["dihedral_closed"])
            inv.check("corner_dihedral_two_routes", key, e <= 1e-12, where, e)
            if r["dihedral_base"] < 0 and r["pairing"] < 0:
                inv.check("corner_dihedral_acute", key,
                          r["dihedral"] <= r["dihedral_base"] + 1e-15, where, None)
        small = r["eps"] <= tol["corner_positivity_eps"] * sc.scale * (1 + 1e-9)
        if small and r["H_p"] >= -1e-9 and r["pairing"] < 0:
            inv.check("corner_positivity", key, r["H_formula"] > 0, where, None)
        if small and r["pairing"] > 0 and abs(r["theta"]) < 1e-12:
            inv.check("corner_positivity_obtuse_control", key, r["H_formula"] > 0, where,
                      None, expected_fail=True)


def _sweep_invariants(rows, scenarios, tol, inv):
    by = {}
    for r in rows:
        if r.get("status") != "ok":
            continue
        where = _replay(r, "kind", "theta", "eps_list")
        if abs(r["expected_a"]) < 1e-12:
            inv.check(f"{r['kind']}_fit_coefficient", r["scenario"], abs(r["a"]) < tol["fit_zero_abs"],
                      where, abs(r["a"]))
        else:
            inv.check(f"{r['kind']}_fit_coefficient", r["scenario"],
                      r["relative_error"] <= tol["fit_rel"], where, r["relative_error"])
        by[(r["scenario"], r["kind"], round(r["theta"], 12))] = r
    for (name, kind, th), r in sorted(by.items()):
        if abs(th - round(np.pi / 3, 12)) < 1e-12 and (name, kind, 0.0) in by:
            a0 = by[(name, kind, 0.0)]["a"]
            if abs(a0) > 1e-9 and kind == "tube":
                ratio = r["a"] / a0
                e = abs(ratio - 0.5) / 0.5
                inv.check("tube_fit_cos_ratio", name, e <= tol["fit_ratio_rel"],
                          {"scenario": name, "a0": a0, "a_pi_3": r["a"]}, e)


# --------------------------------------------------------------------------------------
# commands


def _core_rows(tol):
    rows = []

    def add(fixture, point, expected, computed, ok, err):
        rows.append({"scenario": "", "fixture": fixture, "point": point, "expected": expected,
                     "computed": computed, "error": err, "passed": bool(ok)})

    for r in (0.5, 1.0, 2.0):
        g = round_sphere_metric(r)
        for x in ([0.0, 0.0], [0.3 * r, -0.2 * r]):
            k = float(curvature(g, np.array(x)).scalar)
            e = abs(k - 2 / r**2) / (2 / r**2)
            add(f"round-sphere r={r!r}", x, 2 / r**2, k, e <= tol["core_kappa_rel"], e)
    g = poincare_metric()
    for x in ([0.0, 0.0], [0.3, 0.2]):
        k = float(curvature(g, np.array(x)).scalar)
        e = abs(k + 2) / 2
        add("poincare", x, -2.0, k, e <= tol["core_kappa_rel"], e)
    for n in (2, 3, 4):
        x = np.linspace(-0.5, 0.5, n)
        k = float(curvature(flat_metric(n), x).scalar)
        add(f"euclidean n={n}", x, 0.0, k, abs(k) < tol["core_flat_abs"], abs(k))
    gam = christoffel(polar_metric(), np.array([2.0, 0.3]))
    e = max(abs(gam[0, 1, 1] + 2.0), abs(gam[1, 0, 1] - 0.5), abs(gam[1, 1, 0] - 0.5))
    add("polar christoffel", [2.0, 0.3], "G^r_tt=-2;G^t_rt=0.5", [gam[0, 1, 1], gam[1, 0, 1]],
        e <= tol["core_christoffel_abs"], e)
    return rows


def _selftest_rows(scenarios):
    rows = []
    for name, sc in scenarios.items():
        for key in sorted(sc.truths):
            try:
                got = sc._evaluate_truth(key)
            except GeometryError as exc:
                rows.append({"scenario": name, "fixture": f"truth {key}", "point": "",
                             "expected": sc.truths[key], "computed": str(exc), "error": None,
                             "passed": False})
                continue
            if got is None:
                continue
            want = np.asarray(sc.truths[key], float)
            err = float(np.max(np.abs(np.asarray(got, float) - want)))
            rows.append({"scenario": name, "fixture": f"truth {key}", "point": "anchor",
                         "expected": sc.truths[key], "computed": got, "error": err,
                         "passed": err <= 1e-6 * max(1.0, float(np.max(np.abs(want))))})
    return rows


def _tasks(command, scenarios, cfg):
    tasks = []
    for name, sc in scenarios.items():
        text = serialize(sc)
        base = {"scenario": name, "scenario_text": text}
        if command == "verify-tube":
            if "wall1" not in sc.surfaces:
                continue
            qs = sc.sample_points(count=cfg["q_count"], seed=cfg["seed"])
            for i, q in enumerate(qs):
                for e in cfg["eps"]:
                    for th in cfg["theta"]:
                        tasks.append({**base, "q_index": i, "q": q.tolist(), "eps": e, "theta": th})
        elif command == "verify-corner":
            if not sc.has_corner:
                continue
            for e in cfg["eps"]:
                for th in cfg["theta"]:
                    tasks.append({**base, "eps": e, "theta": th})
        elif command == "sweep":
            kinds = ["tube"] if "wall1" in sc.surfaces else []
            if sc.has_corner:
                kinds.append("corner")
            for kind in kinds:
                for th in cfg["theta"]:
                    tasks.append({**base, "kind": kind, "eps": list(cfg["eps"]), "theta": th})
    return tasks


def _execute(command, tasks, workers):
    items = [(command, t) for t in tasks]
    if workers <= 1 or len(items) <= 1:
        return [_run_task(it) for it in items]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_run_task, items, chunksize=max(1, len(items) // (4 * workers))))


def _write_outputs(out, command, rows, summary):
    out.mkdir(parents=True, exist_ok=True)
    rows = sorted(rows, key=_sort_key(command))
    write_csv(out / f"{command}.csv", COLUMNS[command], rows)
    (out / f"{command}.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True))


def run(cfg):
    """Execute one command; returns ``(exit_status, summary)``."""
    command = cfg["command"]
    out = Path(cfg["out"])
    if command == "report":
        return _report(out)
    t0 = time.perf_counter()
    scenarios = cfg["scenarios"]
    tol = cfg["tolerances"]
    inv = Invariants()
    errors = []
    if command == "check-core":
        rows = _core_rows(tol) + _selftest_rows(scenarios)
        for r in rows:
            inv.check("core_fixture" if not r["scenario"] else "scenario_truths", r["scenario"],
                      r["passed"], _replay(r, "fixture", "point"), r["error"]
                      if isinstance(r["error"], float) else None)
        fits = []
    else:
        tasks = _tasks(command, scenarios, cfg)
        rows = _execute(command, tasks, cfg["workers"])
        errors = [r for r in rows if r.get("status") == "error"]
        if command == "verify-tube":
            _tube_invariants(rows, scenarios, tol, inv)
        elif command == "verify-corner":
            _corner_invariants(rows, scenarios, tol, inv)
        else:
            _sweep_invariants(rows, scenarios, tol, inv)
        fits = [r for r in rows if command == "sweep" and r.get("status") == "ok"]
    table = inv.table()
    failed = [t for t in table if not t["passed"]]
    status = 2 if errors else (1 if failed else 0)
    summary = {
        "command": command,
        "status": status,
        "config": {k: v for k, v in cfg.items() if k not in ("scenarios", "out")}
        | {"scenarios": sorted(scenarios)},
        "invariants": table,
        "fits": [{k: r[k] for k in ("scenario", "kind", "theta", "a", "b", "residual",
                                     "expected_a", "relative_error")} for r in fits],
        "errors": [{k: v for k, v in r.items() if k != "scenario_text"} for r in errors],
        "evaluations": len(rows),
        "wall_clock_s": time.perf_counter() - t0,
    }
    _write_outputs(out, command, rows, summary)
    return status, summary


def _report(out):
    rows, worst = [], 0
    for path in sorted(out.glob("*.json")):
        if path.name == "report.json":
            continue
        try:
            s = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            continue
        if "invariants" not in s:
            continue
        worst = max(worst, int(s.get("status", 0)))
        for t in s["invariants"]:
            rows.append({"command": s.get("command"), "name": t["name"], "scenario": t["scenario"],
                         "checked": t["checked"], "violations": t["violations"],
                         "expected_fail": t["expected_fail"], "passed": t["passed"],
                         "worst": t["worst"]})
    if not rows:
        raise ConfigError(f"no summaries found in {out}")
    rows.sort(key=lambda r: (r["command"], r["name"], r["scenario"]))
    cols = ["command", "name", "scenario", "checked", "violations", "expected_fail", "passed", "worst"]
    write_csv(out / "report.csv", cols, rows)
    status = worst if worst else (1 if any(not r["passed"] for r in rows) else 0)
    summary = {"command": "report", "status": status, "invariants": rows}
    (out / "report.json").write_text(json.dumps(_jsonable(summary), indent=2, sort_keys=True))
    return status, summary


# --------------------------------------------------------------------------------------
# argument handling


def _float_list(text, what):
    try:
        vals = [float(v) for v in str(text).replace(",", " ").split()]
    except ValueError:
        raise ConfigError(f"{what} must be a comma-separated list of numbers") from None
    if not vals:
        raise ConfigError(f"{what} must not be empty")
    return vals


def _parse_overrides(text):
    if isinstance(text, dict):
        items = text
    else:
        text = str(text).strip()
        if text.startswith("{"):
            items = json.loads(text)
        else:
            items = {}
            for part in filter(None, text.split(",")):
                k, eq, v = part.partition("=")
                if not eq:
                    raise ConfigError(f"malformed tolerance override {part!r} (expected key=value)")
                items[k.strip()] = v
    out = {}
    for k, v in items.items():
        if k not in TOLERANCES:
            raise ConfigError(f"unknown tolerance {k!r}; known: {', '.join(sorted(TOLERANCES))}")
        try:
            out[k] = float(v)
        except ValueError:
            raise ConfigError(f"tolerance {k!r} must be a number") from None
    return out


def _load_scenarios(selectors, command):
    if not selectors:
        selectors = [] if command == "check-core" else ["all"]
    out = {}
    for sel in selectors:
        if sel == "none":
            continue
        if sel == "all":
            found = [builtin(n, p) for n, p in BUILTIN_DEFAULTS]
        elif sel.endswith(".json") or os.path.isfile(sel):
            try:
                found = [load_scenario(Path(sel).read_text())]
            except OSError as exc:
                raise ConfigError(f"cannot read scenario file {sel!r}: {exc}") from None
        else:
            found = [parse_selector(sel)]
        for sc in found:
            key = sc.name if not sc.params else f"{sc.name}:" + ",".join(
                f"{k}={v}" for k, v in sorted(sc.params.items()))
            out[key] = sc
    return out


def build_parser():
    p = argparse.ArgumentParser(prog="doubling", description=__doc__.split("\n\n")[0])
    p.add_argument("command", nargs="?", choices=COMMANDS)
    p.add_argument("--scenario", action="append",
                   help="builtin name, name:key=value,..., a JSON file, 'all' or 'none' (repeatable)")
    p.add_argument("--eps", help="comma-separated ε values in units of scenario scale")
    p.add_argument("--theta-grid", help="comma-separated angles in radians")
    p.add_argument("--q-count", type=int, help="surface sample points per tube scenario (default 5)")
    p.add_argument("--seed", type=int, help="seed for surface sampling (default 0)")
    p.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./doubling-out)")
    p.add_argument("--workers", type=int, help="worker processes (default 1)")
    p.add_argument("--tol-overrides", help="key=value,... or a JSON object")
    p.add_argument("--config", help="JSON file with any of the options above")
    return p


def resolve_config(args):
    file_cfg = {}
    if args.config:
        try:
            file_cfg = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from None
        if not isinstance(file_cfg, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = set(file_cfg) - {"command", "scenario", "eps", "theta_grid", "q_count", "seed",
                                   "out", "workers", "tol_overrides"}
        if unknown:
            raise ConfigError(f"unknown config keys: {', '.join(sorted(unknown))}")

    def pick(name, default=None):
        v = getattr(args, name)
        return v if v is not None else file_cfg.get(name, default)

    command = pick("command")
    if command not in COMMANDS:
        raise ConfigError(f"a command is required: one of {', '.join(COMMANDS)}")
    out = pick("out") or os.environ.get(OUT_ENV) or "doubling-out"
    cfg = {"command": command, "out": str(out)}
    if command == "report":
        return cfg
    sel = pick("scenario")
    if isinstance(sel, str):
        sel = [sel]
    eps = pick("eps", DEFAULT_EPS.get(command))
    theta = pick("theta_grid", DEFAULT_THETA.get(command))
    eps = _float_list(" ".join(map(str, eps)) if isinstance(eps, list) else eps, "--eps") if eps else None
    theta = _float_list(" ".join(map(str, theta)) if isinstance(theta, list) else theta,
                        "--theta-grid") if theta else None
    if eps is not None and any(e <= 0 or e >= 0.5 for e in eps):
        raise ConfigError("ε values must lie in (0, 0.5) (units of scenario scale, below the focal bound)")
    if theta is not None and any(abs(t) > np.pi / 2 for t in theta):
        raise ConfigError("θ values must lie in [-π/2, π/2]")
    if command == "sweep" and eps is not None and len(set(eps)) < 2:
        raise ConfigError("sweep needs at least two distinct ε values")
    workers = int(pick("workers", 1))
    if workers < 1:
        raise ConfigError("--workers must be at least 1")
    q_count = int(pick("q_count", 5))
    if q_count < 1:
        raise ConfigError("--q-count must be at least 1")
    tol = dict(TOLERANCES)
    over = pick("tol_overrides")
    if over:
        try:
            tol.update(_parse_overrides(over))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"--tol-overrides is not valid JSON: {exc}") from None
    try:
        scenarios = _load_scenarios(sel, command)
    except ScenarioError as exc:
        raise ConfigError(f"scenario error: {exc}") from None
    cfg.update(scenarios=scenarios, eps=eps, theta=theta, seed=int(pick("seed", 0)),
               workers=workers, q_count=q_count, tolerances=tol)
    return cfg


def _print_summary(summary, stream):
    for t in summary["invariants"]:
        mark = "PASS" if t["passed"] else "FAIL"
        ctl = " (control: violation expected)" if t["expected_fail"] else ""
        scen = f" [{t['scenario']}]" if t["scenario"] else ""
        print(f"{mark} {t['name']}{scen}: {t['checked']} checked, {t['violations']} violations{ctl}",
              file=stream)
    for e in summary.get("errors", []):
        print(f"ERROR {e.get('scenario')}: {e.get('message')}", file=stream)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
        status, summary = run(cfg)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    _print_summary(summary, sys.stdout)
    print(f"exit status {status}; outputs in {cfg['out']}", file=sys.stdout)
    return status


if __name__ == "__main__":
    sys.exit(main())
