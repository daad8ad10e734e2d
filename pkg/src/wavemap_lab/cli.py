"""Command-line front end: ``python -m wavemap_lab <subcommand> --config c.json --out dir``.

Subcommands: simulate, modulate, diagnose, exterior, threshold, sharpness.
Configs are JSON validated against ``schema/config.schema.json``; unknown
keys are rejected.  Exit codes: 0 success, 2 config error, 3 some runs failed.
The worker count for sweeps is read from the WAVEMAP_WORKERS variable.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from . import diagnostics, linear, modulation
from .evolve import SolverConfig, evolve, write_trace
from .fields import RadialGrid
from .scenarios import Scenario, build_data, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNS = 0, 2, 3
COMMANDS = ("simulate", "modulate", "diagnose", "exterior", "threshold", "sharpness")


# default solvers of the sweep subcommands.  cfl 0.4 keeps the energy
# drift of the threshold family below 1e-6; the glued data carry a slowly
# decaying harmonic tail, hence the large geometric domain and support_tol.
THRESHOLD_SOLVER = {"dr": 2e-3, "cfl": 0.4, "t_final": 20.0, "r_max": 26.0, "snapshot_stride": 500}
SHARPNESS_SOLVER = {"dr": 1e-3, "t_final": 3.0, "r_max": 200.0, "snapshot_stride": 20,
                    "spacing": "geometric", "support_tol": 1e-6}


class ConfigError(ValueError):
    pass


def load_schema() -> dict:
    return json.loads(resources.files("wavemap_lab").joinpath("schema/config.schema.json").read_text())


def validate_config(command: str, cfg: dict) -> None:
    schema = load_schema()
    sub = {"$defs": schema["$defs"], "$ref": f"#/$defs/{command}"}
    try:
        jsonschema.validate(cfg, sub)
    except jsonschema.ValidationError as exc:
        raise ConfigError(f"{command} config: {exc.message}") from None


def load_config(command: str, path) -> dict:
    try:
        cfg = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    validate_config(command, cfg)
    return cfg


def _scenario(d: dict) -> Scenario:
    try:
        return Scenario.from_dict(d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def _failed(records) -> bool:
    return any(r.get("stop_reason") == "failed" for r in records)


# ----------------------------------------------------------------------------
# subcommands
# ----------------------------------------------------------------------------


def cmd_simulate(cfg: dict, out: Path) -> int:
    recs = run_scenario(_scenario(cfg["scenario"]), out, snapshots=cfg.get("snapshots", True))
    return EXIT_RUNS if _failed(recs) else EXIT_OK


def cmd_modulate(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    if "coercivity_amplitudes" in cfg:
        gcfg = cfg.get("coercivity_grid", {})
        grid = RadialGrid.uniform(gcfg.get("r_max", 50.0), h=gcfg.get("h", 1e-3))
        table = modulation.coercivity_curve(modulation.coercivity_family(grid, cfg["coercivity_amplitudes"]))
        modulation.write_coercivity(table, out / "coercivity.csv")
    if "scenario" in cfg:
        sc = _scenario(cfg["scenario"])
        try:
            data = build_data(sc.builder, sc.params, sc.solver.make_grid())
            trace = evolve(data, sc.solver)
        except Exception as exc:
            (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
            return EXIT_RUNS
        write_trace(trace, out, snapshots=False)
        modulation.write_modulation(trace, out / "modulation.csv")
        if trace.blew_up:
            _write_bubbling(trace, out / "bubbling.csv", cfg.get("kappa", 0.25))
    return status


def _write_bubbling(trace, path, kappa) -> None:
    T = trace.t_plus()
    t_ref = modulation.radiation_reference_time(trace, T)
    rad, _ = modulation.radiation_trace(trace, t_ref)
    times = diagnostics.select_times(trace, T, kappa=kappa, t_min=t_ref)
    recs = modulation.bubbling_extract(trace, times=times, T=T, radiation=rad) if times else []
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(("t", "lambda", "ratio", "distance", "sign", "remainder_norm"))
        for r in recs:
            w.writerow((repr(r.t), repr(r.lam), repr(r.ratio), repr(r.distance), r.sign, repr(r.remainder_norm)))


def cmd_diagnose(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    sc = _scenario(cfg["scenario"])
    try:
        data = build_data(sc.builder, sc.params, sc.solver.make_grid())
        trace = evolve(data, sc.solver)
    except Exception as exc:
        (out / "error.txt").write_text(f"{type(exc).__name__}: {exc}\n")
        return EXIT_RUNS
    write_trace(trace, out, snapshots=False)
    kw = {}
    if "radii" in cfg:
        kw["radii"] = tuple(cfg["radii"])
    if "lambda_frac" in cfg:
        kw["lambda_frac"] = cfg["lambda_frac"]
    diagnostics.write_diagnostics(trace, out / "diagnostics.json", **kw)
    return EXIT_OK


def cmd_exterior(cfg: dict, out: Path) -> int:
    out.mkdir(parents=True, exist_ok=True)
    tcfg = cfg.get("times", {})
    times = np.linspace(tcfg.get("start", 0.0), tcfg.get("stop", 5.0), tcfg.get("num", 51))
    family = cfg.get("family", sorted(linear.FREE_FAMILY))
    unknown = set(family) - set(linear.FREE_FAMILY)
    if unknown:
        raise ConfigError(f"unknown family members {sorted(unknown)}")
    sweep = linear.exterior_sweep(cfg.get("dims", [4, 8]), family, times, h=cfg.get("h", 1e-2),
                                  repulsive_2d=cfg.get("repulsive_2d", True))
    rows = list(sweep.rows)
    floors = dict(sweep.floors)
    if "witness" in cfg:
        w = cfg["witness"]
        wit = linear.search_witness(dim=w.get("dim", 6), t=w.get("t", 2.0), knots=w.get("knots"),
                                    h=w.get("h", 2.5e-3), max_evals=w.get("max_evals", 20000))
        rows.append((wit.dim, wit.t, wit.ratio))
        floors[f"witness_d{wit.dim}"] = wit.ratio
        (out / "witness.json").write_text(json.dumps(wit.to_dict(), indent=1))
    linear.write_exterior(rows, out / "exterior.csv")
    (out / "floors.json").write_text(json.dumps(floors, indent=1))
    return EXIT_OK


def cmd_threshold(cfg: dict, out: Path) -> int:
    solver = cfg.get("solver", THRESHOLD_SOLVER)
    sc = Scenario("below_threshold", "below_threshold", {"shape_id": cfg.get("shape", "r_gauss")},
                  SolverConfig(**solver), [], {"energy": cfg.get("energies", [2.0, 4.0, 6.0, 7.5])})
    recs = run_scenario(sc, out, snapshots=cfg.get("snapshots", False))
    return EXIT_RUNS if _failed(recs) else EXIT_OK


def cmd_sharpness(cfg: dict, out: Path) -> int:
    solver = cfg.get("solver", SHARPNESS_SOLVER)
    params = {"s": cfg.get("s", 0.2), "iterations": cfg.get("iterations", 6)}
    sc = Scenario("sharpness", "glued", params, SolverConfig(**solver), [], {"delta": cfg.get("deltas", [0.25, 0.5, 1.0])})
    recs = run_scenario(sc, out, snapshots=cfg.get("snapshots", False))
    return EXIT_RUNS if _failed(recs) else EXIT_OK


HANDLERS = {
    "simulate": cmd_simulate,
    "modulate": cmd_modulate,
    "diagnose": cmd_diagnose,
    "exterior": cmd_exterior,
    "threshold": cmd_threshold,
    "sharpness": cmd_sharpness,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wavemap_lab", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=HANDLERS[name].__name__.replace("cmd_", "") + " runs")
        sp.add_argument("--config", required=True, help="JSON config file")
        sp.add_argument("--out", required=True, help="output directory")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    out = Path(args.out)
    try:
        cfg = load_config(args.command, args.config)
        return HANDLERS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
