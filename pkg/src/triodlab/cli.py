"""Command line driver: one subcommand per pipeline stage plus ``all``.

Every stage reads the run configuration, writes its artifacts into the run
directory and merges its metrics and gates into ``summary.json``.  Reports
carry the configuration hash and package versions and contain no clocks, so
identical inputs give byte-identical JSON.

Exit status: 0 when every gate of the executed stages passes, 1 when a gate
fails, 2 for configuration problems, 3 when a stage raises, 4 when an
upstream artifact is missing.
"""
from __future__ import annotations

import argparse
import copy
import datetime as _dt
import hashlib
import json
import math
import os
import platform
import sys
import time
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import connect, field, flux, potential, young
from .errors import ConfigError, ConvergenceError, DependencyError, InvalidArgumentError, TriodLabError

__all__ = ["main", "load_config", "config_hash", "STAGES", "DEFAULTS"]

STAGES = ("validate-potential", "connect", "relax", "flux2d", "flux3d", "young")

DEFAULTS = {
    "workers": 1,
    "output": {"root": "runs"},
    "potential": {"validation": {"n_samples": 1000, "radius": 10.0, "fd_tol": 1e-5, "seed": 0}},
    "connection": {"L": 12.0, "N": 801, "tol": 1e-8, "max_iter": 20000, "equipartition_tol": 1e-3,
                   "pairs": [[1, 2], [2, 3], [3, 1]]},
    "field": {"n": 512, "h": 0.1, "method": "semi-implicit", "time_step": None, "max_steps": 20000,
              "tol": 1e-6, "check_every": 200, "angles_deg": [90.0, 210.0, 330.0],
              "tube_width": 10.0, "blend": 0.5},
    "flux": {"modes": ["2d", "3d"], "radius_2d": 20.0, "n_2d": 4096, "radii_3d": [40.0, 80.0, 160.0],
             "schedule": {"kind": "custom", "c1": flux.DEFAULT_C1, "c2": 1.0, "p1": 0.8, "p2": 0.75},
             "delta_deg": None, "resolution": 4.0, "balance_tol": 0.02, "window_tol": 0.05,
             "strip_tol": 0.05, "I_tol": 1e-3, "cap_exponent": -0.5, "cap_exponent_tol": 0.1},
    "young": {"annulus": [5.0, 20.0], "angle_tol_deg": 2.0, "balance_tol": 0.02, "sine_tol": 0.03},
}

_TRIOD_PAIRS = [[1, 2], [2, 3], [3, 1]]


# configuration ----------------------------------------------------------------

def _schema():
    return json.loads(resources.files("triodlab").joinpath("configs/schema.json").read_text())


def _merge(base, over):
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def bundled_config(name):
    """Path of a configuration shipped with the package (e.g. ``symmetric.json``)."""
    return resources.files("triodlab").joinpath("configs", name)


def load_config(path):
    """Parse, validate against the schema and fill defaults.

    Raises
    ------
    ConfigError
        Unreadable JSON, schema violations (including unknown keys) or
        inconsistent values.
    """
    p = Path(path)
    if not p.exists():
        alt = bundled_config(p.name)
        if alt.is_file():
            p = alt
        else:
            raise ConfigError(f"config file {path} not found")
    try:
        raw = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
    try:
        jsonschema.validate(raw, _schema())
    except jsonschema.ValidationError as exc:
        loc = "/".join(str(x) for x in exc.absolute_path) or "<root>"
        raise ConfigError(f"{path}: {loc}: {exc.message}") from exc
    cfg = _merge(DEFAULTS, raw)
    if isinstance(cfg["flux"]["schedule"], dict):
        cfg["flux"]["schedule"] = _merge(DEFAULTS["flux"]["schedule"], raw.get("flux", {}).get("schedule", {}))
    _check_consistency(cfg)
    return cfg


def _check_consistency(cfg):
    pot = cfg["potential"]
    if pot["family"] == "equilateral":
        if "minima" in pot:
            raise ConfigError("potential.minima is not used by the equilateral family; give 'side'")
    elif "minima" not in pot:
        raise ConfigError(f"potential family {pot['family']!r} needs 'minima'")
    r0, r1 = cfg["young"]["annulus"]
    if not r0 < r1:
        raise ConfigError("young.annulus must satisfy r_min < r_max")
    radii = cfg["flux"]["radii_3d"]
    if any(b <= a for a, b in zip(radii[:-1], radii[1:])):
        raise ConfigError("flux.radii_3d must increase")


def config_hash(cfg):
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def make_spec(cfg):
    pot = cfg["potential"]
    if pot["family"] == "equilateral":
        return potential.equilateral_spec(pot.get("side", 1.0))
    if pot["family"] == "double-well":
        return potential.TripleWellSpec(np.array(pot["minima"], dtype=float), family="double-well")
    return potential.TripleWellSpec(np.array(pot["minima"], dtype=float), family="product")


def connection_width(spec):
    """2 / sqrt(smallest Hessian eigenvalue over the wells)."""
    mu = min(float(np.linalg.eigvalsh(spec._hess(a)).min()) for a in spec.minima)
    return 2.0 / math.sqrt(mu) if mu > 0 else math.inf


# run directory and reports ----------------------------------------------------

def _versions():
    import numba
    import scipy

    from . import __version__
    return {"triodlab": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def _clean(o):
    if isinstance(o, dict):
        return {str(k): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (np.floating, float)):
        x = float(o)
        return x if math.isfinite(x) else None
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    return o


def _dump(obj, dest):
    Path(dest).write_text(json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n")


class Run:
    """A run directory plus the loaded configuration."""

    def __init__(self, cfg, out=None, force=False):
        self.cfg = cfg
        self.force = force
        self.hash = config_hash(cfg)
        if out is None:
            root = Path(os.environ.get("TRIOD_LAB_OUT", cfg["output"]["root"]))
            stamp = _dt.datetime.now().strftime("%Y%m%d-%H%M%S")
            out = root / f"{cfg['name']}-{stamp}"
        self.dir = Path(out)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.spec = make_spec(cfg)

    def path(self, name):
        return self.dir / name

    def claim(self, *names):
        """Refuse to overwrite stage outputs unless ``--force``."""
        for n in names:
            p = self.path(n)
            if p.exists() and not self.force:
                raise FileExistsError(f"{p} exists; pass --force to overwrite")

    def require(self, *names):
        for n in names:
            p = self.path(n)
            if not p.exists():
                raise DependencyError(f"missing upstream artifact {p}")

    def provenance(self):
        return {"config_hash": self.hash, "versions": _versions(), "config": self.cfg}

    def record(self, stage, metrics, gates):
        """Merge a stage's metrics and gates into summary.json."""
        p = self.path("summary.json")
        summ = json.loads(p.read_text()) if p.exists() else {"stages": {}}
        summ.update(self.provenance())
        summ["stages"][stage] = {"metrics": _clean(metrics), "gates": _clean(gates),
                                 "passed": all(g["passed"] for g in gates.values())}
        summ["passed"] = all(s["passed"] for s in summ["stages"].values())
        _dump(summ, p)
        return summ["stages"][stage]["passed"]


def _gate(value, limit, kind="<="):
    ok = value <= limit if kind == "<=" else value >= limit
    return {"value": value, "limit": limit, "op": kind, "passed": bool(ok)}


def _range_gate(value, lo, hi):
    return {"value": value, "range": [lo, hi], "passed": bool(lo <= value <= hi)}


# stages -----------------------------------------------------------------------

def stage_validate(run):
    run.claim("potential.json")
    v = run.cfg["potential"]["validation"]
    rep = potential.validate(run.spec, n_samples=v["n_samples"], radius=v["radius"],
                             fd_tol=v["fd_tol"], seed=v["seed"])
    _dump({**run.provenance(), "report": rep.to_dict()}, run.path("potential.json"))
    gates = {"checks": {"value": rep.failures(), "passed": rep.passed}}
    return {"report": rep.to_dict()}, gates


def _connection_file(i, j):
    return f"U{i}{j}.csv"


def stage_connect(run):
    c = run.cfg["connection"]
    names = [_connection_file(i, j) for i, j in c["pairs"]]
    run.claim(*names, "connections.json")
    rows, gates = [], {}
    for (i, j), name in zip(c["pairs"], names):
        path = connect.solve_connection(run.spec, i - 1, j - 1, L=c["L"], N=c["N"], tol=c["tol"],
                                        max_iter=c["max_iter"])
        connect.write_connection_csv(path, run.path(name))
        row = {"pair": [i, j], "file": name, "sigma": path.action,
               "equipartition_residual": path.equipartition_residual,
               "el_residual": path.el_residual, "endpoint_error": path.endpoint_error,
               "iterations": path.iterations}
        rows.append(row)
        print(f"  sigma_{i}{j} = {path.action:.12f}  -> {run.path(name)}")
        gates[f"el_residual_{i}{j}"] = _gate(path.el_residual, c["tol"])
        gates[f"equipartition_{i}{j}"] = _gate(path.equipartition_residual, c["equipartition_tol"])
    _dump({**run.provenance(), "connections": rows}, run.path("connections.json"))
    return {"connections": rows}, gates


def _load_connections(run):
    names = [_connection_file(i, j) for i, j in _TRIOD_PAIRS]
    run.require(*names)
    return [connect.read_connection_csv(run.path(n), run.spec) for n in names]


def _initial_angles(run, cons):
    ang = run.cfg["field"]["angles_deg"]
    if ang == "predict":
        phi = young.predict_angles(*[c.action for c in cons])
        return np.pi / 2 + np.array([0.0, phi[1], phi[1] + phi[2]])
    return np.deg2rad(np.asarray(ang, dtype=float))


def stage_relax(run):
    run.claim("field.trio")
    fc = run.cfg["field"]
    if run.spec.n_wells != 3:
        raise InvalidArgumentError("relaxation needs a potential with three wells")
    cons = _load_connections(run)
    ext = (fc["n"] - 1) * fc["h"] / 2
    width = connection_width(run.spec)
    if ext < 3 * width:
        raise ConfigError(f"grid half-extent {ext:g} is below three connection widths ({3 * width:g})")
    angles = _initial_angles(run, cons)
    f0 = field.init_triod(run.spec, cons, angles, n=fc["n"], h=fc["h"],
                          tube_width=fc["tube_width"], blend=fc["blend"])
    try:
        f = field.relax(f0, tau=fc["time_step"], max_steps=fc["max_steps"], tol=fc["tol"],
                        check_every=fc["check_every"], method=fc["method"])
    except ConvergenceError as exc:
        if exc.result is not None:
            field.write_snapshot(exc.result, run.path("field.partial.trio"), {"provenance": run.provenance()})
        raise
    hist = f.history
    meta = {"provenance": run.provenance(), "initial_residual": f0.residual_norm,
            "energy_history": hist["energy"], "residual_history": hist["residual"],
            "step_history": hist["step"], "method": hist["method"],
            "boundary_jump": field.FieldSampler(f).boundary_jump()}
    field.write_snapshot(f, run.path("field.trio"), meta)
    e = np.asarray(hist["energy"])
    mono = bool(np.all(np.diff(e) <= 1e-10 * np.maximum(1.0, np.abs(e[:-1])))) if len(e) > 1 else True
    metrics = {"residual_norm": f.residual_norm, "steps": f.steps, "energy": float(e[-1]),
               "energy_monotone": mono, "angles_deg": np.rad2deg(angles).tolist(),
               "boundary_jump": meta["boundary_jump"]}
    print(f"  residual {f.residual_norm:.3e} after {f.steps} steps -> {run.path('field.trio')}")
    gates = {"residual": _gate(f.residual_norm, fc["tol"]),
             "energy_monotone": {"value": mono, "passed": mono}}
    return metrics, gates


def _load_field(run):
    run.require("field.trio")
    cons = _load_connections(run)
    vals, hdr, meta = field.read_snapshot(run.path("field.trio"))
    geo_meta = (meta or {}).get("geometry")
    if geo_meta is None:
        raise DependencyError(f"{run.path('field.trio.json')} lacks the triod geometry")
    geo = field.TriodGeometry(np.asarray(geo_meta["angles_rad"]), cons, run.spec.minima,
                              geo_meta["tube_width"], geo_meta["blend"])
    f = field.GridField(vals, hdr["spacing"], run.spec, geo)
    f.residual_norm = meta.get("residual_norm", float("nan"))
    return f, cons


def stage_flux2d(run):
    run.claim("flux2d.json")
    fx = run.cfg["flux"]
    f, cons = _load_field(run)
    sig = np.array([c.action for c in cons])
    cf = flux.flux_circle_2d(field.FieldSampler(f), fx["radius_2d"], fx["n_2d"])
    rel = float(np.linalg.norm(cf.total) / sig.sum())
    werr = []
    for w, s in zip(cf.windows, sig):
        nu = np.array([math.cos(w["azimuth"]), math.sin(w["azimuth"]), 0.0])
        werr.append(float(np.linalg.norm(np.asarray(w["vector"]) + s * nu) / s))
    rep = {**cf.to_dict(), "sigmas": sig, "relative_total": rel, "window_relative_error": werr}
    _dump({**run.provenance(), "flux2d": rep}, run.path("flux2d.json"))
    print(f"  |total| / sum(sigma) = {rel:.3e}, window errors {np.round(werr, 5).tolist()}")
    gates = {"balance": _gate(rel, fx["balance_tol"]), "windows": _gate(max(werr), fx["window_tol"])}
    return {"relative_total": rel, "window_relative_error": werr}, gates


def _deltas(fx):
    d = fx["delta_deg"]
    return None if d is None else np.deg2rad(d)


def stage_flux3d(run):
    run.claim("flux3d.json")
    fx = run.cfg["flux"]
    f, cons = _load_field(run)
    sig = np.array([c.action for c in cons])
    # validate every plan before any quadrature
    for R in fx["radii_3d"]:
        flux.make_surgery_plan(R, fx["schedule"], f.geometry.angles, _deltas(fx), fx["resolution"])
    study = flux.convergence_study(field.FieldSampler(f), fx["schedule"], fx["radii_3d"],
                                   f.geometry.angles, _deltas(fx), fx["resolution"], sig,
                                   workers=run.cfg["workers"])
    decs = study.pop("decompositions")
    _dump({**run.provenance(), "flux3d": study}, run.path("flux3d.json"))
    fits = study["fits"]
    strip_err = decs[-1].strip_errors(sig)
    imax = float(max(d.I.max() for d in decs))
    totals = fits["total_magnitude"]
    mono = all(b < a for a, b in zip(totals[:-1], totals[1:]))
    gates = {"strip_at_largest_R": _gate(float(strip_err.max()), fx["strip_tol"]),
             "I_bound": _gate(imax, 2.0 + fx["I_tol"]),
             "total_decreasing": {"value": totals, "passed": mono}}
    if len(decs) > 1:
        e0, tol = fx["cap_exponent"], fx["cap_exponent_tol"]
        gates["cap_bound_exponent"] = _range_gate(fits["cap_bound_exponent"], e0 - tol, e0 + tol)
    print(f"  strip errors at R = {decs[-1].plan.R:g}: {np.round(strip_err, 4).tolist()}, "
          f"cap exponent {fits['cap_bound_exponent']:.3f}, totals {np.round(totals, 8).tolist()}")
    metrics = {"strip_relative_error": strip_err, "I_max": imax, **fits}
    return metrics, gates


def stage_young(run):
    run.claim("angles.json")
    yc = run.cfg["young"]
    f, cons = _load_field(run)
    sig = np.array([c.action for c in cons])
    rep = young.measure(f, sig, tuple(yc["annulus"]))
    d = rep.to_dict()
    _dump({**run.provenance(), "angles": d}, run.path("angles.json"))
    _append_csv(run, rep)
    print(f"  angles {np.round(d['angles_deg'], 3).tolist()} deg, predicted "
          f"{np.round(d.get('predicted_deg', [math.nan] * 3), 3).tolist()}")
    gates = {"sine_spread": _gate(rep.spread, yc["sine_tol"]),
             "balance": _gate(rep.balance, yc["balance_tol"])}
    if rep.predicted is not None:
        gates["angles"] = _gate(float(np.rad2deg(rep.max_angle_error())), yc["angle_tol_deg"])
    return d, gates


def _append_csv(run, rep):
    p = run.path("report.csv")
    new = not p.exists()
    pred = rep.predicted if rep.predicted is not None else np.full(3, np.nan)
    with open(p, "a") as fh:
        if new:
            fh.write("region,angle_deg,predicted_deg,opposite_sigma,sine_ratio\n")
        opp = [rep.sigmas[1], rep.sigmas[2], rep.sigmas[0]]
        for k in range(3):
            fh.write(f"C{k + 1},{np.rad2deg(rep.angles[k]):.10g},{np.rad2deg(pred[k]):.10g},"
                     f"{opp[k]:.10g},{rep.ratios[k]:.10g}\n")


_STAGE_FUNCS = {
    "validate-potential": stage_validate,
    "connect": stage_connect,
    "relax": stage_relax,
    "flux2d": stage_flux2d,
    "flux3d": stage_flux3d,
    "young": stage_young,
}


def _plan(cfg, stage):
    if stage != "all":
        return [stage]
    out = ["validate-potential", "connect", "relax", "young"]
    modes = cfg["flux"]["modes"]
    out += [s for m, s in (("2d", "flux2d"), ("3d", "flux3d")) if m in modes]
    return out


def run_stages(cfg, stages, out=None, force=False):
    """Run the stages in order; returns the exit status."""
    run = Run(cfg, out, force)
    print(f"run directory: {run.dir}")
    status = 0
    for st in stages:
        t0 = time.perf_counter()
        print(f"[{st}]")
        try:
            metrics, gates = _STAGE_FUNCS[st](run)
        except DependencyError as exc:
            print(f"[{st}] dependency error: {exc}", file=sys.stderr)
            return 4
        except ConfigError as exc:
            print(f"[{st}] configuration error: {exc}", file=sys.stderr)
            return 2
        except (TriodLabError, FileExistsError) as exc:
            print(f"[{st}] {type(exc).__name__}: {exc}", file=sys.stderr)
            return 3
        ok = run.record(st, metrics, gates)
        failed = [k for k, g in gates.items() if not g["passed"]]
        print(f"[{st}] {'pass' if ok else 'FAIL ' + ', '.join(failed)} ({time.perf_counter() - t0:.1f} s)")
        if not ok:
            status = 1
    return status


def build_parser():
    ap = argparse.ArgumentParser(prog="triod-lab", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)
    for name in STAGES + ("all",):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="run configuration (JSON); bundled names such as symmetric.json also work")
        p.add_argument("--out", default=None,
                       help="run directory (default: timestamped directory under $TRIOD_LAB_OUT or output.root)")
        p.add_argument("--force", action="store_true", help="overwrite existing stage outputs")
    sub.add_parser("schema", help="print the configuration schema")
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "schema":
        print(json.dumps(_schema(), indent=2))
        return 0
    try:
        cfg = load_config(args.config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    return run_stages(cfg, _plan(cfg, args.command), args.out, args.force)


if __name__ == "__main__":
    sys.exit(main())
