"""Command-line driver: ``angenent {init,flow,search,shoot,verify,plot}``.

Exit codes: 0 success, 1 numerical failure, 2 usage or config error.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import __version__, svg
from .curve import ClosedCurve, axis_crossings, hausdorff, is_simple, max_asymmetry, read_curve_csv, write_curve_csv
from .flow import FlowConfig, FlowError, Outcome, run, write_diagnostics_csv
from .geometry import DomainError, MetricContext
from .initializer import InitializerConstants, provenance, solve_phi
from .search import BracketError, bisect, refine, write_trace_jsonl
from .shooter import ShootingError, closed_geodesic_report, find_closed_geodesic, write_trajectory_csv
from .verifier import dump_json, run_all

log = logging.getLogger("angenent")

FORMATS = ("csv", "json", "svg")
DETERMINISM = ("outputs are a deterministic function of the echoed config and tool version; "
               "no random numbers and no wall-clock data are used")
TOLERANCE_KEYS = {"convergence_tol_kg", "length_rate_tol", "length_increase_tol", "area_drift_tol"}
CONFIG_KEYS = {"lambda", "a", "a_lo", "a_hi", "tol_a", "n_vertices", "cfl", "max_time", "resample_every",
               "check_every", "record_every", "snapshots", "tolerances", "refine_n"}


class UsageError(Exception):
    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


def _positive(cfg, key, kind=float):
    v = cfg[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or (kind is int and not float(v).is_integer()):
        raise UsageError(f"{key} must be a {'positive integer' if kind is int else 'positive number'}", key)
    if not v > 0 or not math.isfinite(v):
        raise UsageError(f"{key} must be positive and finite", key)
    return kind(v)


def load_config(path, lam_override=None) -> dict:
    """Read and validate a JSON run config; unknown keys are rejected."""
    cfg: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file {path} not found", "config")
        except json.JSONDecodeError as exc:
            raise UsageError(f"config is not valid JSON: {exc}", "config")
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object", "config")
    unknown = sorted(set(cfg) - CONFIG_KEYS)
    if unknown:
        raise UsageError(f"unknown config keys: {', '.join(unknown)}", unknown[0])
    if lam_override is not None:
        cfg["lambda"] = lam_override
    if "lambda" not in cfg:
        raise UsageError("lambda is required (config or --lambda)", "lambda")
    lam = _positive(cfg, "lambda")
    if not lam > 1:
        raise UsageError("lambda must exceed 1", "lambda")
    out = {"lambda": lam, "a": cfg.get("a", "auto")}
    if out["a"] != "auto":
        out["a"] = _positive(cfg, "a")
    for key, kind in (("n_vertices", int), ("cfl", float), ("max_time", float), ("resample_every", int),
                      ("check_every", int), ("record_every", int), ("a_lo", float), ("a_hi", float),
                      ("tol_a", float), ("snapshots", int), ("refine_n", int)):
        if key in cfg:
            out[key] = _positive(cfg, key, kind)
    if "n_vertices" in out and (out["n_vertices"] < 16 or out["n_vertices"] % 2):
        raise UsageError("n_vertices must be an even integer >= 16", "n_vertices")
    if "cfl" in out and out["cfl"] > 0.5:
        raise UsageError("cfl must not exceed 0.5", "cfl")
    tol = cfg.get("tolerances", {})
    if not isinstance(tol, dict):
        raise UsageError("tolerances must be an object", "tolerances")
    bad = sorted(set(tol) - TOLERANCE_KEYS)
    if bad:
        raise UsageError(f"unknown tolerance keys: {', '.join(bad)}", f"tolerances.{bad[0]}")
    out["tolerances"] = {k: _positive(tol, k) for k in sorted(tol)}
    return out


def flow_config(cfg: dict, search: bool = False) -> FlowConfig:
    base = FlowConfig(n_vertices=256, check_every=100, resample_every=100, max_time=80.0) if search else FlowConfig()
    changes = {k: cfg[k] for k in ("n_vertices", "cfl", "max_time", "resample_every", "check_every",
                                   "record_every") if k in cfg}
    changes.update(cfg["tolerances"])
    return base.with_(**changes)


class Artifacts:
    """Collects output files and writes the manifest."""

    def __init__(self, out_dir, formats):
        self.dir = Path(out_dir)
        self.formats = set(formats)
        self.files: list[str] = []

    def want(self, fmt):
        return fmt in self.formats

    def path(self, name):
        self.dir.mkdir(parents=True, exist_ok=True)
        self.files.append(name)
        return self.dir / name

    def json(self, name, obj):
        if self.want("json"):
            with open(self.path(name), "w") as fh:
                json.dump(obj, fh, indent=1, sort_keys=True, default=_jsonable)
                fh.write("\n")

    def manifest(self, command, lam, config, inputs=()):
        outputs = []
        for name in self.files:
            digest = hashlib.sha256((self.dir / name).read_bytes()).hexdigest()
            outputs.append({"path": name, "sha256": digest})
        man = {"command": command, "lambda": lam, "config": config, "inputs": list(inputs), "outputs": outputs,
               "determinism": DETERMINISM, "version": __version__}
        self.dir.mkdir(parents=True, exist_ok=True)
        with open(self.dir / "manifest.json", "w") as fh:
            json.dump(man, fh, indent=1, sort_keys=True, default=_jsonable)
            fh.write("\n")


def _jsonable(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, Outcome):
        return o.value
    raise TypeError(type(o))


def _curve_svg(art, name, ctx, labelled):
    if art.want("svg"):
        svg.write(art.path(name), labelled, ctx.r_cyl)


def _curve_csv(art, name, c):
    if art.want("csv"):
        write_curve_csv(art.path(name), c)


def _auto_bracket(ctx, cfg):
    return cfg.get("a_lo", 0.1 * ctx.r_cyl), cfg.get("a_hi", 0.9 * ctx.r_cyl)


def _search(ctx, cfg, art):
    fcfg = flow_config(cfg, search=True)
    lo, hi = _auto_bracket(ctx, cfg)
    res = bisect(ctx, fcfg, lo, hi, tol_a=cfg.get("tol_a", 1e-12))
    if art.want("json"):
        write_trace_jsonl(art.path("search_trace.jsonl"), res.trace)
    levels = []
    if res.outcome is Outcome.CONVERGED and cfg.get("refine_n", 1024) > fcfg.n_vertices:
        levels = refine(ctx, res.flow, cfg.get("refine_n", 1024), fcfg.with_(max_time=10.0, check_every=50))
    return res, fcfg, levels


def _level_summary(levels):
    return [{"n_vertices": len(r.state.curve), "outcome": r.outcome.value, "time": r.state.time,
             "max_abs_kg": r.state.max_abs_kg, "max_rel_length_increase": r.stats.max_rel_length_increase}
            for r in levels]


def cmd_init(args, cfg, art):
    ctx = MetricContext(cfg["lambda"])
    consts = InitializerConstants()
    a = cfg["a"] if cfg["a"] != "auto" else 0.5 * ctx.r_cyl
    rect = solve_phi(ctx, consts, a, cfg.get("n_vertices", 1024))
    _curve_csv(art, "initial_curve.csv", rect.curve)
    _curve_svg(art, "initial_curve.svg", ctx, [("initial_curve", rect.curve.points)])
    art.json("initial.json", provenance(ctx, consts, rect))
    return 0


def cmd_flow(args, cfg, art):
    ctx = MetricContext(cfg["lambda"])
    consts = InitializerConstants()
    summary = {}
    if cfg["a"] == "auto":
        sres, fcfg, levels = _search(ctx, cfg, art)
        res, a = sres.flow, sres.a0
        summary.update({"bracket": list(sres.bracket), "search_outcome": sres.outcome.value,
                        "refinement": _level_summary(levels)})
        if levels:
            res = levels[-1]
    else:
        fcfg = flow_config(cfg)
        a = cfg["a"]
        snaps = cfg.get("snapshots", 4)
        rect = solve_phi(ctx, consts, a, fcfg.n_vertices)
        res = run(ctx, rect.curve, fcfg, keep_curves_every=max(1, snaps))
    return _flow_outputs(ctx, consts, a, fcfg, res, art, summary)


def _flow_outputs(ctx, consts, a, fcfg, res, art, summary):
    rect = solve_phi(ctx, consts, a, fcfg.n_vertices)
    final = res.state.curve
    drift = max(abs(h["gauss_area"] - 2 * math.pi) for h in res.history) / (2 * math.pi)
    summary.update({"outcome": res.outcome.value, "a": a, "b": rect.b, "c": rect.c,
                    "final_length": res.state.length, "2*L_g(P)": 2 * ctx.len_halfline,
                    "length_margin": 2 * ctx.len_halfline - res.state.length, "gauss_area_drift": drift,
                    "time": res.state.time, "steps": res.stats.steps, "max_abs_kg": res.state.max_abs_kg,
                    "r_min": res.state.r_min, "r_max": res.state.r_max, "simple": is_simple(final),
                    "asymmetry": max_asymmetry(final), "stats": asdict(res.stats),
                    "flow_config": asdict(fcfg), "note": res.note})
    if art.want("csv"):
        write_diagnostics_csv(art.path("diagnostics.csv"), res.history)
    _curve_csv(art, "initial_curve.csv", rect.curve)
    _curve_csv(art, "final_curve.csv", final)
    # labels are the CSV stems so `angenent plot` on the CSVs reproduces the SVG
    labelled = [("initial_curve", rect.curve.points)]
    summary["snapshots"] = []
    for k, (t, c) in enumerate(getattr(res, "curves", [])[1:-1]):
        _curve_csv(art, f"snapshot_{k:03d}.csv", c)
        labelled.append((f"snapshot_{k:03d}", c.points))
        summary["snapshots"].append({"file": f"snapshot_{k:03d}.csv", "time": t})
    labelled.append(("final_curve", final.points))
    _curve_svg(art, "flow.svg", ctx, labelled)
    art.json("summary.json", summary)
    return 0


def cmd_search(args, cfg, art):
    ctx = MetricContext(cfg["lambda"])
    sres, fcfg, levels = _search(ctx, cfg, art)
    return _flow_outputs(ctx, InitializerConstants(), sres.a0, fcfg, levels[-1] if levels else sres.flow, art,
                         {"bracket": list(sres.bracket), "probes": len(sres.trace), "uniqueness": sres.note,
                          "search_outcome": sres.outcome.value, "refinement": _level_summary(levels)})


def cmd_shoot(args, cfg, art):
    ctx = MetricContext(cfg["lambda"])
    geo = find_closed_geodesic(ctx, n_vertices=cfg.get("n_vertices", 1024))
    rep = closed_geodesic_report(ctx, geo)
    _curve_csv(art, "geodesic.csv", geo.curve)
    if art.want("csv"):
        write_trajectory_csv(art.path("trajectory.csv"), geo.trajectory)
        with open(art.path("sweep.csv"), "w") as fh:
            fh.write("launch_r,terminal,return_angle,return_r\n")
            for row in geo.table:
                d = row.as_dict()
                fh.write(",".join("" if d[k] is None else (f"{d[k]:.17g}" if isinstance(d[k], float) else str(d[k]))
                                  for k in ("launch_r", "terminal", "return_angle", "return_r")) + "\n")
    labelled = [("geodesic", geo.curve.points)]
    if args.compare:
        other = read_curve_csv(args.compare)
        rep["hausdorff_to_compare"] = hausdorff(geo.curve, other)
        rep["compare_axis_crossings"] = [float(v) for v in axis_crossings(other.points)]
        rep["compare_note"] = "informational; coincidence of the two constructions is not asserted"
        labelled.append((Path(args.compare).stem, other.points))
    _curve_svg(art, "geodesic.svg", ctx, labelled)
    art.json("summary.json", rep)
    return 0


def cmd_verify(args, cfg, art):
    rep = run_all()
    if art.want("json"):
        dump_json(rep, art.path("verify.json"))
    for name, s in rep["summary"].items():
        print(f"{name}: {s['n'] - s['failures']}/{s['n']} pass, min margin {s['min_margin']:.6g}")
    return 0 if rep["passed"] else 1


def cmd_plot(args, cfg, art):
    curves = [(Path(p).stem, read_curve_csv(p).points) for p in args.curves]
    r_cyl = math.sqrt(2.0 * (cfg["lambda"] - 1.0))
    svg.write(art.path(args.name), curves, r_cyl)
    return 0


COMMANDS = {"init": cmd_init, "flow": cmd_flow, "search": cmd_search, "shoot": cmd_shoot, "verify": cmd_verify,
            "plot": cmd_plot}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="angenent", description="Closed geodesics of the weighted half-plane")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--lambda", dest="lam", type=float, help="weight exponent (overrides the config)")
        s.add_argument("--config", help="JSON run config")
        s.add_argument("--out-dir", default=".", help="directory for artifacts")
        s.add_argument("--format", action="append", choices=FORMATS,
                       help="artifact types to write (repeatable; default all)")
        s.add_argument("-v", "--verbose", action="store_true")
        if name == "shoot":
            s.add_argument("--compare", help="curve CSV to compare against (Hausdorff distance)")
        if name == "plot":
            s.add_argument("curves", nargs="+", help="curve CSV files")
            s.add_argument("--name", default="curves.svg")
    return p


def _threads():
    val = os.environ.get("ANGENENT_THREADS")
    if val is None:
        return
    try:
        n = int(val)
    except ValueError:
        raise UsageError("ANGENENT_THREADS must be an integer", "ANGENENT_THREADS")
    if n < 1:
        raise UsageError("ANGENENT_THREADS must be at least 1", "ANGENENT_THREADS")
    import numba
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))


def _error(kind, exc, field=None):
    obj = {"error": kind, "message": str(exc)}
    if field:
        obj["field"] = field
    print(json.dumps(obj, sort_keys=True), file=sys.stderr)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(name)s: %(message)s")
    try:
        _threads()
        if args.command == "verify" and args.lam is None and args.config is None:
            cfg = {"lambda": 2.0}
        else:
            cfg = load_config(args.config, args.lam)
    except UsageError as exc:
        _error("usage", exc, exc.field)
        return 2
    art = Artifacts(args.out_dir, args.format or FORMATS)
    try:
        code = COMMANDS[args.command](args, cfg, art)
    except (FlowError, ShootingError, BracketError, DomainError, ValueError, RuntimeError) as exc:
        _error("numerical", exc)
        code = 1
    if art.files:
        art.manifest(args.command, cfg["lambda"], cfg, [args.config] if args.config else [])
    return code


if __name__ == "__main__":
    sys.exit(main())
