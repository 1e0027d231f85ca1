"""Command-line entry point: run experiments, list them, fit rates from CSV."""

from __future__ import annotations

import argparse
import csv
import json
import sys

from .experiments import EXPERIMENTS, ConfigError, ExperimentConfig, run
from .ratefit import fit_rate


def _cmd_run(args) -> int:
    try:
        cfg = ExperimentConfig.from_file(args.config)
    except (ConfigError, KeyError, ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return 2
    status = run(cfg)
    if status == 0:
        print(f"{cfg.experiment}: all criteria passed -> {cfg.outdir}")
    else:
        print(f"{cfg.experiment}: FAILED (see {cfg.outdir}/summary.json)", file=sys.stderr)
    return status


def _cmd_list(_args) -> int:
    for name in sorted(EXPERIMENTS):
        print(name)
    return 0


def _cmd_fit(args) -> int:
    pairs = []
    try:
        with open(args.csv) as fh:
            reader = csv.DictReader(fh)
            for row in reader:
                pairs.append((float(row[args.x_col]), float(row[args.y_col])))
    except (OSError, KeyError, ValueError) as exc:
        print(f"cannot read pairs: {exc}", file=sys.stderr)
        return 2
    try:
        slope, intercept, resid = fit_rate(pairs)
    except ValueError as exc:
        print(f"fit failed: {exc}", file=sys.stderr)
        return 2
    print(f"slope {slope:.6f}  intercept {intercept:.6f}  residual {resid:.6f}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bflab",
        description="Numerical experiments on balanced embeddings and curvature flows.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the JSON configuration file")
    p_run.set_defaults(func=_cmd_run)

    p_list = sub.add_parser("list", help="list available experiments")
    p_list.set_defaults(func=_cmd_list)

    p_fit = sub.add_parser("fit", help="fit a log-log rate to (k, value) pairs from a CSV")
    p_fit.add_argument("csv", help="CSV file with the pairs")
    p_fit.add_argument("--x-col", default="k")
    p_fit.add_argument("--y-col", default="value")
    p_fit.set_defaults(func=_cmd_fit)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
