"""Command-line entry point: ``agrivolt {simulate,optimize,sweep,validate-config}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from pathlib import Path

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .crop import CropConfigError, SeasonError
from .irradiance import IrradianceInconsistency
from .model import Simulator
from .optimize import ARCHIVE_COLUMNS, analyze, crossover_distance, optimize
from .pv import DiodeFitError
from .weather import WeatherError, load_horizon, load_weather

EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


class DataError(RuntimeError):
    pass


def header(cfg: RunConfig) -> str:
    return f"agrivolt {__version__} config_sha256={cfg.sha256} seed={cfg.seed}"


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def write_table(path: Path, cfg: RunConfig, columns, rows) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# {header(cfg)}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(r[c]) for c in columns])


def build_simulator(cfg: RunConfig, scene=None) -> Simulator:
    try:
        weather = load_weather(cfg.weather, cfg.site)
        horizon = load_horizon(cfg.horizon) if cfg.horizon else None
    except (WeatherError, OSError) as exc:
        raise DataError(str(exc)) from exc
    try:
        return Simulator(weather, horizon, scene or cfg.scene, cfg.module, cfg.crops, cfg.soil,
                         cfg.albedo, cfg.derate, cfg.par_ratio, cfg.per_capacity,
                         cfg.distance_bucket, cfg.azimuth_bucket)
    except SeasonError as exc:
        raise DataError(str(exc)) from exc


# ---------------------------------------------------------------------------

def cmd_simulate(cfg: RunConfig, sim: Simulator | None = None) -> dict:
    sim = sim or build_simulator(cfg)
    ev = sim.evaluate(cfg.scene, bucketed=False)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    ev.power.write(out / "power.csv", [header(cfg)])
    trace = []
    for name, res in ev.crops.items():
        for s in res.states:
            trace.append({"crop": name, "date": s.date.isoformat(), "par_tot": s.par_tot,
                          "hui": s.hui, "lai": s.lai, "water_stress": s.water_stress,
                          "temperature_stress": s.temperature_stress,
                          "regulating_factor": s.regulating_factor,
                          "biomass_increment": s.biomass_increment,
                          "soil_storage": s.soil_storage})
    write_table(out / "crop_trace.csv", cfg, list(trace[0]) if trace else ["crop"], trace)
    summary = [{"crop": n, "yield_t_ha": r.yield_t_ha,
                "reference_yield_t_ha": sim.reference[n].yield_t_ha,
                "harvest_index": r.harvest_index, "biomass_t_ha": r.biomass_t_ha}
               for n, r in ev.crops.items()]
    write_table(out / "yield_summary.csv", cfg,
                ["crop", "yield_t_ha", "reference_yield_t_ha", "harvest_index", "biomass_t_ha"],
                summary)
    kcols = ["crop", "ler", "ler_crop_term", "ler_pv_term", "std_kw", "annual_energy",
             "energy_density", "yield_t_ha", "reference_yield_t_ha", "scene_hash",
             "weather_hash"]
    write_table(out / "kpi.csv", cfg, kcols, [k.as_row() for k in ev.kpis.values()])
    return {"evaluation": ev}


def cmd_optimize(cfg: RunConfig, sim: Simulator | None = None) -> dict:
    sim = sim or build_simulator(cfg)
    archive = optimize(cfg.optimizer, sim)
    tables = analyze(archive)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "archive.csv", cfg, ARCHIVE_COLUMNS, tables["solutions"])
    write_table(out / "correlations.csv", cfg, ["decision", "objective", "pearson", "defined"],
                tables["correlations"])
    write_table(out / "ler_decomposition.csv", cfg,
                ["distance_m", "azimuth_deg", "ler_crop", "ler_pv", "ler"], tables["decomposition"])
    density = [{"variable": var, **row} for var in ("azimuth", "distance")
               for row in tables["density"][var]]
    write_table(out / "density.csv", cfg, ["variable", "bin_lo", "bin_hi", "count"], density)
    return {"archive": archive, "tables": tables}


def sweep_table(cfg: RunConfig, sim: Simulator) -> tuple[list[dict], dict]:
    """Rows of the one-variable sweep and the crop/PV crossover per crop."""
    rows = []
    for v in cfg.sweep.values():
        if cfg.sweep.variable == "distance":
            scene = cfg.scene.with_decision(cfg.scene.panel_azimuth, v)
        else:
            scene = cfg.scene.with_decision(v, cfg.scene.row_distance)
        ev = sim.evaluate(scene)
        row = {"value": v}
        for name, res in ev.crops.items():
            row[f"yield_{name}"] = res.yield_t_ha
        row["specific_pv_production"] = ev.power.annual_energy_kwh / sim.capacity_kwp
        for name, k in ev.kpis.items():
            row[f"ler_{name}"] = k.ler
            row[f"ler_crop_{name}"] = k.ler_crop_term
        row["ler_pv"] = next(iter(ev.kpis.values())).ler_pv_term
        rows.append(row)
    cross = {}
    if cfg.sweep.variable == "distance":
        for name in sim.crops:
            cross[name] = crossover_distance([r["value"] for r in rows],
                                             [r[f"ler_crop_{name}"] for r in rows],
                                             [r["ler_pv"] for r in rows])
    return rows, cross


def cmd_sweep(cfg: RunConfig, sim: Simulator | None = None) -> dict:
    sim = sim or build_simulator(cfg)
    rows, cross = sweep_table(cfg, sim)
    out = cfg.output_dir
    out.mkdir(parents=True, exist_ok=True)
    write_table(out / "sweep.csv", cfg, list(rows[0]), rows)
    if cross:
        write_table(out / "crossover.csv", cfg, ["crop", "crossover_distance_m"],
                    [{"crop": k, "crossover_distance_m": v} for k, v in cross.items()])
    return {"rows": rows, "crossover": cross}


# ---------------------------------------------------------------------------

def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="agrivolt", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"agrivolt {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in ("simulate", "optimize", "sweep", "validate-config"):
        s = sub.add_parser(name)
        s.add_argument("--config", required=True, help="YAML run configuration")
        s.add_argument("--seed", type=int, help="override optimizer.seed")
        s.add_argument("--workers", type=int, help="parallel evaluation width")
        s.add_argument("--out", help="output directory (overrides output_dir)")
    return p


COMMANDS = {"simulate": cmd_simulate, "optimize": cmd_optimize, "sweep": cmd_sweep}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, {"seed": args.seed, "workers": args.workers,
                                        "output_dir": args.out})
    except ConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate-config":
        print(f"ok {header(cfg)}")
        return EXIT_OK
    try:
        COMMANDS[args.command](cfg)
    except (DataError, SeasonError, WeatherError) as exc:
        print(f"error[data]: {exc}", file=sys.stderr)
        return EXIT_DATA
    except CropConfigError as exc:
        print(f"error[config]: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (DiodeFitError, IrradianceInconsistency, ArithmeticError, ValueError) as exc:
        print(f"error[numerical]: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    print(f"done {args.command} -> {cfg.output_dir}")
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
