"""Experiment runner CLI.

Subcommands: ``run <name>`` executes one named experiment and writes a CSV
of rows plus a JSON summary; ``list`` prints the registry; ``cache`` builds
or clears the partition-table cache. Configuration comes from an optional
JSON config file with command-line flags winning over file values. Exit
codes: 0 all assertions passed, 1 an assertion failed, 2 usage error.
"""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import math
import os
import shutil
import sys

from .core import bimodal_density, gaussian_density
from .experiments import (EXPERIMENTS, ExperimentConfig, ExperimentResult,
                          run_experiment, sphere_table, _rate_ks)
from .kacsphere import CACHE_ENV_VAR, cache_path

_USAGE_ERROR = 2


def _cache_root() -> str:
    return os.environ.get(CACHE_ENV_VAR,
                          os.path.join(os.path.expanduser("~"), ".cache",
                                       "kaclab"))


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kaclab",
                                description="chaos-quantifier experiment runner")
    sub = p.add_subparsers(dest="command")

    run = sub.add_parser("run", help="run one named experiment")
    run.add_argument("name", help="experiment name (see: kaclab list)")
    run.add_argument("--config", help="JSON config file; flags override it")
    run.add_argument("--density",
                     choices=["gaussian", "uniform", "bimodal"])
    run.add_argument("--ns", help="comma-separated N values")
    run.add_argument("--mc-reps", type=int, dest="mc_reps")
    run.add_argument("--reference-size", type=int, dest="reference_size")
    run.add_argument("--seed", type=int)
    run.add_argument("--s", type=float)
    run.add_argument("--k", type=float)
    run.add_argument("--output", help="output path stem")
    run.add_argument("--format", choices=["csv", "json"])
    run.add_argument("--threads", type=int)

    sub.add_parser("list", help="list experiments and the claims they probe")

    cache = sub.add_parser("cache", help="partition-table cache control")
    cache.add_argument("action", choices=["build", "clear"])
    cache.add_argument("--density", default="bimodal",
                       choices=["gaussian", "bimodal"])
    cache.add_argument("--max-n", type=int, default=1024, dest="max_n")
    return p


def _load_config(args) -> ExperimentConfig:
    base = {}
    if args.config:
        with open(args.config) as fh:
            base = json.load(fh)
        unknown = set(base) - {f.name for f in
                               dataclasses.fields(ExperimentConfig)}
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
    cfg = ExperimentConfig(**base)
    cfg.experiment = args.name
    for key in ("density", "mc_reps", "reference_size", "seed", "s", "k",
                "output", "format", "threads"):
        val = getattr(args, key, None)
        if val is not None:
            setattr(cfg, key, val)
    if getattr(args, "ns", None):
        cfg.ns = [int(x) for x in args.ns.split(",")]
    return cfg


def _write_outputs(result: ExperimentResult, cfg: ExperimentConfig):
    stem = cfg.output or f"kaclab_{result.name}"
    csv_path = stem + ".csv"
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["experiment", "N", "quantity", "value", "stderr",
                         "meta"])
        for row in result.rows:
            writer.writerow([row["experiment"], row["N"], row["quantity"],
                             f"{row['value']:.12g}", f"{row['stderr']:.6g}",
                             row["meta"]])
    summary = {
        "experiment": result.name,
        "claim": EXPERIMENTS[result.name][1],
        "passed": result.passed,
        "fits": {k: (None if isinstance(v, float) and math.isnan(v) else v)
                 for k, v in result.fits.items()},
        "assertions": [dataclasses.asdict(a) for a in result.assertions],
        "wall_clock_seconds": result.elapsed,
        "config": result.config,
        "rows": result.rows if cfg.format == "json" else csv_path,
    }
    json_path = stem + ".json"
    with open(json_path, "w") as fh:
        json.dump(summary, fh, indent=2)
    return csv_path, json_path


def _cmd_run(args) -> int:
    try:
        cfg = _load_config(args)
    except (OSError, ValueError, json.JSONDecodeError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return _USAGE_ERROR
    if cfg.experiment not in EXPERIMENTS:
        print(f"unknown experiment {cfg.experiment!r}; run `kaclab list`",
              file=sys.stderr)
        return _USAGE_ERROR
    result = run_experiment(cfg)
    csv_path, json_path = _write_outputs(result, cfg)
    for a in result.assertions:
        mark = "PASS" if a.passed else "FAIL"
        detail = f"  [{a.detail}]" if a.detail else ""
        print(f"{mark}  {result.name}: {a.name}{detail}")
    print(f"wrote {csv_path} and {json_path} "
          f"({result.elapsed:.1f}s)")
    if not result.passed:
        failing = [a.name for a in result.assertions if not a.passed]
        print(f"FAILED criteria: {'; '.join(failing)}", file=sys.stderr)
        return 1
    return 0


def _cmd_list() -> int:
    width = max(len(name) for name in EXPERIMENTS)
    for name, (_, claim) in EXPERIMENTS.items():
        print(f"{name:<{width}}  ->  {claim}")
    print(f"\n{len(EXPERIMENTS)} experiments, one per acceptance criterion.")
    return 0


def _cmd_cache(args) -> int:
    root = _cache_root()
    if args.action == "clear":
        if os.path.isdir(root):
            shutil.rmtree(root)
        print(f"cleared {root}")
        return 0
    density = gaussian_density() if args.density == "gaussian" \
        else bimodal_density()
    ns = [n for n in (32, 64, 128, 256, 512, 1024) if n <= args.max_n]
    table = sphere_table(density, args.max_n, _rate_ks(ns))
    print(f"built table for {table.density_name} (max_N={table.max_N}, "
          f"{len(table.ks)} convolutions) in {root}")
    print(f"cache file: {cache_path(table.density_name, table.max_N, table.du, table.ks)}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "list":
        return _cmd_list()
    if args.command == "cache":
        return _cmd_cache(args)
    parser.print_help()
    return _USAGE_ERROR


if __name__ == "__main__":
    sys.exit(main())
