"""Command-line front end: ``spectropt {torsion,eigs,gamma,optimize,verify,sweep}``.

Exit codes: 0 success, 1 failed verification (or a failed sweep point),
2 invalid configuration or missing input, 3 solver failure.
"""

from __future__ import annotations

import argparse
import copy
import dataclasses
import datetime as dt
import itertools
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import jsonschema
import numpy as np

from . import __version__, io, plotting
from .errors import ConfigError, ConvergenceError, PreconditionError, SpectroptError
from .gamma import gamma_distance, resolvent_distance
from .grid import GridSpec, ScalarField, precedes
from .optimize import (
    PenaltyConfig,
    ball_witness_radius,
    halfline_mass_profile,
    isoperimetric_ratio,
    measure_indicator,
    merit,
    optimize_lambda1_potential,
    optimize_lambdak_potential,
    optimize_spectral_torsion,
    rescale_to_constraint,
    vanishing_point,
)
from .shapes import BOUNDARIES, builtin
from .spectrum import eigs
from .torsion import support_radius, torsion_function

log = logging.getLogger("spectropt")

EXIT_OK, EXIT_VERIFY, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
COMMANDS = ("torsion", "eigs", "gamma", "optimize", "verify", "sweep")
LOG_LEVELS = {"quiet": logging.WARNING, "info": logging.INFO, "debug": logging.DEBUG}
FORMATS = ("json", "csv", "svg")

# --- schema ----------------------------------------------------------------

_GRID = {
    "type": "object",
    "additionalProperties": False,
    "required": ["d", "L", "n"],
    "properties": {
        "d": {"enum": [1, 2]},
        "L": {"type": "number", "exclusiveMinimum": 0},
        "n": {"type": "integer", "minimum": 3},
    },
}
_POTENTIAL = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "kind": {"type": "string"},
        "params": {"type": "object"},
        "boundary": {"enum": list(BOUNDARIES)},
        "path": {"type": "string"},
    },
    "oneOf": [{"required": ["kind"]}, {"required": ["path"]}],
}
_SOLVER = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "tol": {"type": "number", "exclusiveMinimum": 0},
        "k": {"type": "integer", "minimum": 1},
        "max_iters": {"type": "integer", "minimum": 1},
        "tol_obj": {"type": "number", "exclusiveMinimum": 0},
        "seed": {"type": "integer", "minimum": 0},
    },
}
_PROBLEM = {
    "type": "object",
    "additionalProperties": False,
    "required": ["kind"],
    "properties": {
        "kind": {"enum": ["potential-mass", "spectral-torsion"]},
        "k": {"type": "integer", "minimum": 1},
        "p": {"type": "number", "exclusiveMinimum": 0},
        "m": {"type": "number", "exclusiveMinimum": 0},
        "damping": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
        "v_cap": {"type": "number", "exclusiveMinimum": 0},
        "audit": {"type": "boolean"},
    },
}
_OUTPUT = {
    "type": "object",
    "additionalProperties": False,
    "properties": {"formats": {"type": "array", "items": {"enum": list(FORMATS)}, "uniqueItems": True}},
}


def _schema(required, **props):
    return {"type": "object", "additionalProperties": False, "required": required, "properties": props}


SCHEMAS = {
    "torsion": _schema(["grid", "potential"], grid=_GRID, potential=_POTENTIAL, solver=_SOLVER, output=_OUTPUT),
    "eigs": _schema(["grid", "potential"], grid=_GRID, potential=_POTENTIAL, solver=_SOLVER, output=_OUTPUT),
    "gamma": _schema(
        ["grid", "potential", "other"], grid=_GRID, potential=_POTENTIAL, other=_POTENTIAL, solver=_SOLVER, output=_OUTPUT
    ),
    "optimize": _schema(
        ["grid", "problem"], grid=_GRID, problem=_PROBLEM, init=_POTENTIAL, solver=_SOLVER, output=_OUTPUT
    ),
    "verify": _schema(
        [],
        checks={
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "filter": {"type": "array", "items": {"type": "string"}},
                "oracles": {"type": "object"},
            },
        },
        jobs={"type": "integer", "minimum": 1},
    ),
    "sweep": _schema(
        ["command", "base", "axes"],
        command={"enum": ["torsion", "eigs", "gamma", "optimize"]},
        base={"type": "object"},
        axes={"type": "object", "minProperties": 1, "additionalProperties": {"type": "array", "minItems": 1}},
        rank_by={"type": "string"},
        jobs={"type": "integer", "minimum": 1},
    ),
}

DEFAULTS = {
    "solver": {"tol": 1e-10, "k": 1, "max_iters": 500, "tol_obj": 1e-12, "seed": 0},
    "output": {"formats": list(FORMATS)},
    "problem": {"k": 1, "p": 0.5, "m": 1.0, "damping": 0.5, "audit": True},
}


def _merge(base, extra):
    out = copy.deepcopy(base)
    for key, val in extra.items():
        if isinstance(val, dict) and isinstance(out.get(key), dict):
            out[key] = _merge(out[key], val)
        else:
            out[key] = copy.deepcopy(val)
    return out


def resolve_config(command: str, raw: dict, seed: int | None = None) -> dict:
    """Validate against the command schema and fill defaults."""
    if command not in SCHEMAS:
        raise ConfigError(f"unknown command {command!r}")
    try:
        jsonschema.validate(raw, SCHEMAS[command])
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise ConfigError(f"{where}: {exc.message}") from None
    cfg = copy.deepcopy(raw)
    for section in ("solver", "output", "problem"):
        if section in SCHEMAS[command]["properties"] and (section != "problem" or "problem" in cfg):
            cfg[section] = _merge(DEFAULTS[section], cfg.get(section, {}))
    if seed is not None and "solver" in cfg:
        cfg["solver"]["seed"] = int(seed)
    if command == "optimize":
        _penalty(cfg)
    if command == "sweep":
        for point in sweep_points(cfg):
            resolve_config(cfg["command"], point["config"], seed)
    return cfg


# --- building objects from config -------------------------------------------


def _grid(cfg) -> GridSpec:
    g = cfg["grid"]
    try:
        return GridSpec(g["d"], g["L"], g["n"])
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None


def _potential(spec: dict, grid: GridSpec):
    if "path" in spec:
        path = Path(spec["path"])
        if not path.is_file():
            raise FileNotFoundError(f"potential file {path} not found")
        pot = io.load_potential(path)
        if pot.grid != grid:
            raise ConfigError(f"potential file {path} lives on {pot.grid}, config grid is {grid}")
        return pot
    params = dict(spec.get("params", {}))
    if "boundary" in spec:
        params["boundary"] = spec["boundary"]
    try:
        return builtin(grid, spec["kind"], **params)
    except PreconditionError as exc:
        raise ConfigError(str(exc)) from None


def _penalty(cfg) -> PenaltyConfig:
    pr, so = cfg["problem"], cfg["solver"]
    return PenaltyConfig(
        k=pr["k"], p=pr["p"], m=pr["m"], damping=pr["damping"], max_iters=so["max_iters"],
        tol_obj=so["tol_obj"], v_cap=pr.get("v_cap"), seed=so["seed"],
    )


# --- runners -----------------------------------------------------------------


class Run:
    """Artifacts of one command: a JSON report plus CSV/SVG writers."""

    def __init__(self, report: dict, writers=()):
        self.report = report
        self.writers = list(writers)


def run_torsion(cfg) -> Run:
    grid = _grid(cfg)
    pot = _potential(cfg["potential"], grid)
    rep = torsion_function(pot, cfg["solver"]["tol"])
    report = rep.to_dict() | {"support_radius": support_radius(rep.w), "max_w": float(rep.w.values.max())}
    return Run(report, [
        ("csv", "torsion.csv", lambda p: io.field_to_csv(p, rep.w, pot.inf_mask)),
        ("json", "torsion_field.json", lambda p: io.save_field(p, rep.w)),
        ("svg", "torsion.svg", lambda p: plotting.plot_field(rep.w, p, "torsion function", pot.inf_mask)),
    ])


def run_eigs(cfg) -> Run:
    grid = _grid(cfg)
    pot = _potential(cfg["potential"], grid)
    k = cfg["solver"]["k"]
    spec = eigs(pot, k)
    P = torsion_function(pot).P
    lam = spec.eigenvalues
    report = spec.to_dict() | {
        "k": k,
        "lambda_k": float(lam[-1]),
        "torsion": P,
        "merit_torsion": float(lam[-1] * P ** (2.0 / (grid.d + 2))),
    }
    writers = [
        ("csv", "eigenvalues.csv", lambda p: io.write_table(p, ["j", "lambda", "residual"],
                                                            [(j + 1, lam[j], spec.residuals[j]) for j in range(k)])),
        ("svg", "eigenvalues.svg", lambda p: plotting.plot_spectrum(lam, p)),
    ]
    for j, u in enumerate(spec.eigenfunctions, start=1):
        writers.append(("csv", f"eigenfunction_{j}.csv", lambda p, u=u: io.field_to_csv(p, u, pot.inf_mask)))
        writers.append(("svg", f"eigenfunction_{j}.svg",
                        lambda p, u=u, j=j: plotting.plot_field(u, p, f"u_{j}", pot.inf_mask)))
    return Run(report, writers)


def run_gamma(cfg) -> Run:
    grid = _grid(cfg)
    a, b = _potential(cfg["potential"], grid), _potential(cfg["other"], grid)
    tol = cfg["solver"]["tol"]
    report = {"gamma_distance": gamma_distance(a, b, tol), "ordered": precedes(a, b) or precedes(b, a)}
    if report["ordered"]:
        lo, hi = (a, b) if precedes(a, b) else (b, a)
        report["resolvent_distance"] = resolvent_distance(lo, hi)
    wa, wb = torsion_function(a, tol).w, torsion_function(b, tol).w
    diff = wa - wb
    return Run(report, [
        ("csv", "torsion_difference.csv", lambda p: io.field_to_csv(p, diff)),
        ("svg", "torsion_difference.svg", lambda p: plotting.plot_field(diff, p, "w_1 - w_2")),
    ])


def run_optimize(cfg) -> Run:
    grid = _grid(cfg)
    pc = _penalty(cfg)
    kind = cfg["problem"]["kind"]
    init = _potential(cfg["init"], grid) if "init" in cfg else None
    audit = cfg["problem"]["audit"]
    if kind == "potential-mass":
        if pc.k == 1:
            rep = optimize_lambda1_potential(pc, init=init, grid=grid, audit=audit)
        else:
            rep = optimize_lambdak_potential(pc, init=init, grid=grid, audit=audit)
    else:
        rep = optimize_spectral_torsion(pc, init=init, grid=grid, audit=audit)
    pot = rep.final
    tor = torsion_function(pot)
    report = rep.to_dict() | {
        "kind": kind,
        "objective": float(rep.objective_trace[-1]),
        "lambda_k": float(rep.lambda_trace[-1]),
        "torsion": tor.P,
        "boundary_shell_mass": tor.boundary_shell_mass,
        "ball_witness_radius": ball_witness_radius(pot),
        "measure_indicator": measure_indicator(pot),
        "vanishing_points": [vanishing_point(halfline_mass_profile(tor.w, e))
                             for e in ((1.0, -1.0) if grid.d == 1 else ((1.0, 0.0), (-1.0, 0.0)))],
    }
    if kind == "potential-mass":
        report["mass"] = pot.inverse_power_mass(pc.p)
        report["merit"] = merit(pot, pc.k, pc.p)
        if "multiplier" in rep.extras:
            # the k = 1 run is constrained; its penalty twin uses the multiplier
            pc = dataclasses.replace(pc, m=rep.extras["multiplier"])
        t_star, _, t_used = rescale_to_constraint(pot, pc, torsion=False)
    else:
        report["merit"] = merit(pot, pc.k)
        t_star, _, t_used = rescale_to_constraint(pot, pc, torsion=True)
        if grid.d == 2:
            report["isoperimetric_ratio"] = isoperimetric_ratio(tor.w)
    report["t_star"], report["t_representable"] = t_star, t_used
    traces = list(zip(range(len(rep.objective_trace)), rep.objective_trace, rep.lambda_trace,
                      rep.mass_or_torsion_trace))
    return Run(report, [
        ("json", "final_potential.json", lambda p: io.save_potential(p, pot)),
        ("csv", "trace.csv", lambda p: io.write_table(p, ["iter", "objective", "lambda_k", "mass_or_torsion"], traces)),
        ("csv", "final_potential.csv", lambda p: io.field_to_csv(p, _vfin_field(pot), pot.inf_mask)),
        ("csv", "torsion.csv", lambda p: io.field_to_csv(p, tor.w, pot.inf_mask)),
        ("svg", "final_potential.svg", lambda p: plotting.plot_potential(pot, p)),
        ("svg", "torsion.svg", lambda p: plotting.plot_field(tor.w, p, "torsion function", pot.inf_mask)),
        ("svg", "trace.svg", lambda p: plotting.plot_trace(rep.objective_trace, p)),
    ])


def _vfin_field(pot):
    return ScalarField(pot.grid, pot.vfin)


RUNNERS = {"torsion": run_torsion, "eigs": run_eigs, "gamma": run_gamma, "optimize": run_optimize}
HEADLINE = {"torsion": "P", "eigs": "lambda_k", "gamma": "gamma_distance", "optimize": "objective"}


def _metadata(command, cfg, started, finished, extra=None) -> dict:
    meta = {
        "command": command,
        "version": __version__,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "started": started,
        "finished": finished,
    }
    return meta | (extra or {})


def _now():
    return dt.datetime.now(dt.timezone.utc).isoformat()


def execute(command: str, cfg: dict, out: Path) -> dict:
    """Run a single resolved config and write its artifacts into ``out``."""
    started = _now()
    run = RUNNERS[command](cfg)
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.resolved.json", cfg)
    io.write_json(out / "report.json", run.report)
    formats = set(cfg["output"]["formats"])
    for fmt, name, write in run.writers:
        if fmt in formats:
            write(out / name)
    io.write_json(out / "metadata.json", _metadata(command, cfg, started, _now(),
                                                   {"provenance": f"spectropt.cli.run_{command}"}))
    return run.report


# --- sweep ---------------------------------------------------------------------


def _set_path(cfg: dict, dotted: str, value):
    keys = dotted.split(".")
    node = cfg
    for key in keys[:-1]:
        node = node.setdefault(key, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep axis {dotted!r} crosses a non-object")
    node[keys[-1]] = copy.deepcopy(value)


def sweep_points(cfg: dict) -> list[dict]:
    axes = cfg["axes"]
    names = list(axes)
    points = []
    for i, combo in enumerate(itertools.product(*(axes[n] for n in names))):
        point = copy.deepcopy(cfg["base"])
        for name, val in zip(names, combo):
            _set_path(point, name, val)
        points.append({"index": i, "values": dict(zip(names, combo)), "config": point})
    return points


def _sweep_worker(args):
    command, cfg, out = args
    try:
        report = execute(command, cfg, Path(out))
        return {"status": "ok", "report": report}
    except SpectroptError as exc:
        return {"status": "failed", "error": f"{type(exc).__name__}: {exc}"}


def run_sweep(cfg: dict, out: Path, jobs: int, seed: int | None) -> int:
    command = cfg["command"]
    points = sweep_points(cfg)
    resolved = [resolve_config(command, p["config"], seed) for p in points]
    out.mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.resolved.json", cfg)
    started = _now()
    args = [(command, c, str(out / f"point_{p['index']:03d}")) for p, c in zip(points, resolved)]
    if jobs <= 1:
        results = [_sweep_worker(a) for a in args]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_sweep_worker, args))
    key = cfg.get("rank_by", HEADLINE[command])
    rows = []
    for p, res in zip(points, results):
        val = res.get("report", {}).get(key)
        rows.append({"point": p["index"], "status": res["status"], key: val,
                     "values": json.dumps(p["values"], sort_keys=True), "error": res.get("error", "")})
    ok_rows = sorted((r for r in rows if r["status"] == "ok"), key=lambda r: (r[key] is None, r[key]))
    ranked = ok_rows + [r for r in rows if r["status"] != "ok"]
    io.write_table(out / "leaderboard.csv", ["rank", "point", "status", key, "values", "error"],
                   [(i + 1, r["point"], r["status"], r[key] if r[key] is not None else "", r["values"], r["error"])
                    for i, r in enumerate(ranked)])
    io.write_json(out / "report.json", {"command": command, "rank_by": key, "points": rows})
    io.write_json(out / "metadata.json", _metadata("sweep", cfg, started, _now(), {"jobs": jobs}))
    failed = [r["point"] for r in rows if r["status"] != "ok"]
    if failed:
        _record("sweep-point-failed", f"points {failed} failed")
        return EXIT_VERIFY
    return EXIT_OK


# --- verify ----------------------------------------------------------------


def run_verify(cfg: dict, out: Path, jobs: int, filters) -> int:
    from . import verify

    checks_cfg = cfg.get("checks", {})
    filters = filters if filters is not None else checks_cfg.get("filter")
    oracles = checks_cfg.get("oracles", {})
    verify.select(filters)
    unknown = [k for k in oracles if k not in verify.ORACLES]
    if unknown:
        raise ConfigError(f"unknown oracle {unknown}")
    started, t0 = _now(), time.perf_counter()
    verdicts = verify.run_checks(filters, oracles, jobs)
    elapsed = time.perf_counter() - t0
    (out / "checks").mkdir(parents=True, exist_ok=True)
    io.write_json(out / "config.resolved.json", cfg | {"checks": {"filter": filters, "oracles": oracles}})
    for v in verdicts:
        io.write_json(out / "checks" / f"{v['name']}.json", v)
    io.write_json(out / "report.json", {
        "checks": [{"name": v["name"], "passed": v["passed"]} for v in verdicts],
        "all_passed": all(v["passed"] for v in verdicts),
    })
    io.write_json(out / "metadata.json", _metadata("verify", cfg, started, _now(),
                                                   {"elapsed_seconds": elapsed, "jobs": jobs,
                                                    "provenance": "spectropt.verify.CHECKS"}))
    failed = [v["name"] for v in verdicts if not v["passed"]]
    for v in verdicts:
        log.info("%s %s", "PASS" if v["passed"] else "FAIL", v["name"])
    if failed:
        _record("verify-failed", "failing checks: " + ",".join(failed))
        return EXIT_VERIFY
    return EXIT_OK


# --- entry point ---------------------------------------------------------------


def _record(kind: str, message: str):
    """One machine-parseable JSON line on stderr."""
    print(json.dumps({"error": kind, "message": message}, sort_keys=True), file=sys.stderr)


def _parser():
    ap = argparse.ArgumentParser(prog="spectropt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON config file (verify may omit it)")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--jobs", type=int, default=None)
        sp.add_argument("--filter", default=None, help="comma-separated check names or groups (verify)")
    return ap


def _setup_logging() -> None:
    level = os.environ.get("SPECTROPT_LOG", "quiet")
    if level not in LOG_LEVELS:
        raise ConfigError(f"SPECTROPT_LOG must be one of {sorted(LOG_LEVELS)}, got {level!r}")
    logging.basicConfig(level=LOG_LEVELS[level], format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    log.setLevel(LOG_LEVELS[level])


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        _setup_logging()
        if args.config is None:
            if args.command != "verify":
                raise ConfigError("--config is required")
            raw = {}
        else:
            path = Path(args.config)
            if not path.is_file():
                _record("missing-file", f"config file {path} not found")
                return EXIT_CONFIG
            try:
                raw = json.loads(path.read_text())
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
        cfg = resolve_config(args.command, raw, args.seed)
        if args.jobs is not None and args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        jobs = args.jobs or cfg.get("jobs", 1)
        out = Path(args.out)
        if args.command == "verify":
            filters = args.filter.split(",") if args.filter else None
            return run_verify(cfg, out, jobs, filters)
        if args.command == "sweep":
            return run_sweep(cfg, out, jobs, args.seed)
        # build everything that can fail validation before touching the disk
        log.info("running %s", args.command)
        execute(args.command, cfg, out)
        return EXIT_OK
    except FileNotFoundError as exc:
        _record("missing-file", str(exc))
        return EXIT_CONFIG
    except (ConfigError, PreconditionError) as exc:
        _record("config", str(exc))
        return EXIT_CONFIG
    except ConvergenceError as exc:
        _record("solver", str(exc))
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
