"""Command-line experiment runner.

    xbar-sim <program|infer|sweep|train|report|validate>
             --config <path> [--out <dir>] [--seed N] [--jobs N]

Subcommands: `program` builds and saves crossbars, `infer` evaluates a
crossbar-backed network, `sweep` varies one numeric parameter, `train` runs
SGD with the configured noise mode, `report` exports the device preset table
and compensation records, `validate` prints config diagnostics. Outputs are
deterministic given (config, seed): rerunning a command reproduces its files
byte for byte. --jobs (or XBARSIM_JOBS) parallelizes sweep points without
affecting output order.
"""

from __future__ import annotations

import argparse
import os
import sys

from .config import config_digest, load_config, validate_config
from .errors import ConfigError, XbarSimError
from .experiments import (
    run_infer,
    run_program,
    run_report,
    run_sweep,
    run_train,
    write_meta,
    write_results,
)

COMMANDS = ("program", "infer", "sweep", "train", "report", "validate")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="xbar-sim",
        description="Crossbar-array inference simulator and experiment runner.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", required=True, help="experiment config (YAML)")
        cmd.add_argument("--out", help="output directory", default=None)
        cmd.add_argument("--seed", type=int, default=None, help="override the config seed")
        cmd.add_argument(
            "--jobs",
            type=int,
            default=None,
            help="parallel workers for sweeps (default: XBARSIM_JOBS or 1)",
        )
    return parser


def _jobs(args) -> int:
    if args.jobs is not None:
        return max(1, args.jobs)
    env = os.environ.get("XBARSIM_JOBS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"XBARSIM_JOBS must be an integer, got {env!r}")
    return 1


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)

    if args.command == "validate":
        try:
            issues = validate_config(args.config)
        except ConfigError as exc:
            print(f"xbarsim.config: {exc}", file=sys.stderr)
            return 1
        for issue in issues:
            print(issue)
        if issues:
            print(f"{len(issues)} problem(s) found", file=sys.stderr)
            return 1
        print("config ok")
        return 0

    if args.out is None:
        print("error: --out is required for this command", file=sys.stderr)
        return 1

    try:
        overrides = {"seed": args.seed} if args.seed is not None else None
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"xbarsim.config: {exc}", file=sys.stderr)
        return 1

    os.makedirs(args.out, exist_ok=True)
    digest = config_digest(cfg)
    try:
        if args.command == "infer":
            rows = run_infer(cfg)
        elif args.command == "sweep":
            rows = run_sweep(cfg, jobs=_jobs(args))
        elif args.command == "train":
            rows = run_train(cfg, args.out)
        elif args.command == "program":
            rows = run_program(cfg, args.out)
        elif args.command == "report":
            rows = run_report(cfg, args.out)
        else:  # pragma: no cover - argparse restricts choices
            raise ConfigError(f"unknown command {args.command}")
    except XbarSimError as exc:
        module = type(exc).__module__.rsplit(".", 1)[0]
        print(f"{module}.{type(exc).__name__}: {exc}", file=sys.stderr)
        return 2

    write_results(args.out, rows, digest, cfg["seed"])
    write_meta(args.out, args.command, digest, cfg["seed"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
