"""Command line interface: run experiment scenarios, render report figures.

``prioritymarket run --scenario NAME`` executes a scenario and writes three
artifacts under the output directory: per-vehicle records as CSV, per-cell
aggregates as JSON, and the canonical config echo as YAML.  Outputs carry no
timestamps and all floats use repr formatting, so identical configs produce
byte-identical files.  ``prioritymarket report`` renders matplotlib figures
from a run's aggregates next to the delimited output.

Exit codes: 0 success, 1 configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from prioritymarket import experiments
from prioritymarket.config import (
    SCENARIO_NAMES,
    ConfigError,
    ScenarioConfig,
    parse_range,
)
from prioritymarket.experiments import RECORD_COLUMNS, SCHEMA_VERSION

OUT_ENV_VAR = "PRIORITYMARKET_OUT"

DESK_DEFAULTS = {
    "benefit-surface": dict(arrivals=5000, warmup=600.0,
                            volumes=[400.0, 800.0, 1200.0, 1600.0, 2000.0, 2400.0]),
    "auction-compare": dict(arrivals=2500, warmup=600.0,
                            volumes=[400.0, 800.0, 1200.0, 1600.0, 2000.0, 2400.0]),
    "sensitivity": dict(arrivals=3000, warmup=600.0, volumes=[1600.0]),
    "discipline-compare": dict(arrivals=3000, warmup=600.0,
                               volumes=[400.0, 800.0, 1200.0, 1600.0, 2000.0]),
    "misreport": dict(arrivals=2400, warmup=300.0, volumes=[1200.0]),
    "obstruction": dict(arrivals=0, warmup=0.0, volumes=[]),
    "arterial": dict(arrivals=1200, warmup=300.0,
                     volumes=[400.0, 600.0, 800.0, 1000.0, 1200.0, 1400.0]),
}


def _volumes(cfg: ScenarioConfig) -> list[float]:
    if cfg.volumes:
        return cfg.volumes
    return DESK_DEFAULTS[cfg.scenario]["volumes"]


def _run_scenario(cfg: ScenarioConfig):
    desk = DESK_DEFAULTS[cfg.scenario]
    arrivals = cfg.arrivals(desk["arrivals"])
    warmup = cfg.warmup(desk["warmup"])
    common = dict(vot_mean=cfg.vot_mean, vot_sd=cfg.vot_sd, parallel=cfg.parallel)
    if cfg.scenario == "benefit-surface":
        return experiments.benefit_surface(
            volumes=_volumes(cfg), seeds=cfg.seeds, mechanism="direct",
            zone_radius_m=cfg.zone_radius_m, penetration=cfg.penetration,
            arrivals_per_cell=arrivals, warmup_s=warmup, **common,
        )
    if cfg.scenario == "auction-compare":
        return experiments.auction_compare(
            volumes=_volumes(cfg), seeds=cfg.seeds,
            zone_radius_m=cfg.zone_radius_m, penetration=cfg.penetration,
            arrivals_per_cell=arrivals, warmup_s=warmup, **common,
        )
    if cfg.scenario == "sensitivity":
        return experiments.sensitivity(
            penetrations=cfg.penetrations, zones=cfg.zones,
            volume=_volumes(cfg)[0], seeds=cfg.seeds,
            arrivals_per_cell=arrivals, warmup_s=warmup, **common,
        )
    if cfg.scenario == "discipline-compare":
        return experiments.discipline_compare(
            volumes=_volumes(cfg), seeds=cfg.seeds,
            zone_radius_m=cfg.zone_radius_m,
            arrivals_per_cell=arrivals, warmup_s=warmup, **common,
        )
    if cfg.scenario == "misreport":
        rec_on, agg_on = experiments.misreport_surface(
            true_vots=cfg.true_vots, declared_vots=cfg.declared_vots,
            payments=True, volume=_volumes(cfg)[0], seeds=cfg.seeds,
            arrivals_per_cell=arrivals, probe_interval_s=cfg.probe_interval_s,
            probe_start_s=warmup, **common,
        )
        rec_off, agg_off = experiments.misreport_surface(
            true_vots=cfg.true_vots, declared_vots=cfg.declared_vots,
            payments=False, volume=_volumes(cfg)[0], seeds=cfg.seeds,
            arrivals_per_cell=arrivals, probe_interval_s=cfg.probe_interval_s,
            probe_start_s=warmup, **common,
        )
        return rec_on + rec_off, agg_on + agg_off
    if cfg.scenario == "obstruction":
        return experiments.obstruction_grid(
            vots=cfg.obstruction_vots, rates=cfg.obstruction_rates,
            seeds=cfg.seeds, horizon_s=cfg.obstruction_horizon_s, **common,
        )
    if cfg.scenario == "arterial":
        return experiments.arterial_compare(
            volumes=_volumes(cfg), seeds=cfg.seeds,
            arrivals_per_cell=arrivals, warmup_s=warmup, **common,
        )
    raise ConfigError(f"unhandled scenario {cfg.scenario!r}")


def _write_outputs(cfg: ScenarioConfig, records, aggregates, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / "vehicles.csv"
    with open(csv_path, "w") as fh:
        fh.write(",".join(RECORD_COLUMNS) + "\n")
        for r in sorted(records, key=lambda r: (r.cell, r.replication, r.vehicle_id)):
            fh.write(",".join(str(x) for x in r.as_row()) + "\n")
    doc = {
        "schema_version": SCHEMA_VERSION,
        "scenario": cfg.scenario,
        "cells": aggregates,
    }
    with open(out_dir / "aggregates.json", "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")
    # The echo describes the computation, not where it landed: identical
    # runs into different directories stay byte-identical.
    echo = dict(cfg.to_dict(), out_dir=None)
    with open(out_dir / "config.yaml", "w") as fh:
        fh.write(ScenarioConfig.from_dict(echo).to_yaml())


def _summary_line(cfg: ScenarioConfig, records, aggregates) -> str:
    if records:
        benefit = float(np.mean([r.benefit_cents for r in records]))
        loss = float(np.mean([r.loss_cents for r in records]))
        transfers = float(np.sum([abs(r.payment_cents) for r in records]) / 2.0)
        return (
            f"{cfg.scenario}: {len(records)} vehicle records, "
            f"mean benefit {benefit:.4f} cents, mean loss {loss:.4f} cents, "
            f"total transfers {transfers:.1f} cents"
        )
    return f"{cfg.scenario}: {len(aggregates)} aggregate cells"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ConfigError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="prioritymarket",
                     description="Intersection priority market simulator")
    sub = parser.add_subparsers(dest="command")

    run = sub.add_parser("run", help="execute a scenario")
    run.add_argument("--scenario", help="scenario name (see --list)")
    run.add_argument("--config", help="YAML config file")
    run.add_argument("--seed", type=int, help="base seed override")
    run.add_argument("--out", help="output directory (default $%s or ./out)" % OUT_ENV_VAR)
    run.add_argument("--volumes", help="volume grid, e.g. 200..1800:200 or 400,800")
    run.add_argument("--parallel", type=int, help="parallel cell workers")
    run.add_argument("--replications", type=int, help="seeds per cell")
    run.add_argument("--full-scale", action="store_true",
                     help="paper-scale arrival counts instead of desk scale")
    run.add_argument("--list", action="store_true", help="list scenarios and exit")

    report = sub.add_parser("report", help="render figures from a run directory")
    report.add_argument("--scenario", required=True)
    report.add_argument("--out", help="run output directory")
    return parser


def _resolve_out(arg_out) -> Path:
    if arg_out:
        return Path(arg_out)
    return Path(os.environ.get(OUT_ENV_VAR, "out"))


def _cmd_run(args) -> int:
    if args.list:
        for name in SCENARIO_NAMES:
            print(name)
        return 0
    data = {}
    if args.config:
        cfg0 = ScenarioConfig.load(args.config)
        data = cfg0.to_dict()
    if args.scenario:
        data["scenario"] = args.scenario
    if "scenario" not in data:
        raise ConfigError("a scenario is required (use --scenario or a config file)")
    if args.seed is not None:
        data["seed"] = args.seed
    if args.volumes:
        data["volumes"] = parse_range(args.volumes)
    if args.parallel is not None:
        data["parallel"] = args.parallel
    if args.replications is not None:
        data["replications"] = args.replications
    if args.full_scale:
        data["full_scale"] = True
    if args.out:
        data["out_dir"] = args.out
    cfg = ScenarioConfig.from_dict(data)
    records, aggregates = _run_scenario(cfg)
    out_dir = _resolve_out(cfg.out_dir) / cfg.scenario
    _write_outputs(cfg, records, aggregates, out_dir)
    print(_summary_line(cfg, records, aggregates))
    print(f"wrote {out_dir}/vehicles.csv, aggregates.json, config.yaml")
    return 0


def _cmd_report(args) -> int:
    from prioritymarket import report

    out_dir = _resolve_out(args.out) / args.scenario
    agg_path = out_dir / "aggregates.json"
    if not agg_path.exists():
        raise ConfigError(f"no aggregates at {agg_path}; run the scenario first")
    figures = report.render(args.scenario, out_dir)
    for fig in figures:
        print(f"wrote {fig}")
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
        parser.print_help()
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"runtime error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
