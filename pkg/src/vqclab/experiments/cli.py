"""Command-line entry point: ``vqclab <experiment> [--config F] [--seed S] ...``."""
from __future__ import annotations

import argparse
import sys

from ..numeric import InvariantViolation
from .config import EXPERIMENTS, ConfigError, experiment_config
from .runners import run_experiment
from .table import emit_outputs

EXIT_OK, EXIT_CONFIG, EXIT_INVARIANT = 0, 2, 3


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vqclab", description="Concentration and anti-concentration experiments "
                                     "for variational circuits on an exact statevector simulator.")
    sub = parser.add_subparsers(dest="experiment", required=True)
    for name in EXPERIMENTS:
        p = sub.add_parser(name, help=f"run the {name} experiment")
        p.add_argument("--config", help="flat YAML key-value file overriding the defaults")
        p.add_argument("--seed", type=_u64, help="master seed (overrides master_seed in the config)")
        p.add_argument("--out", default="results", help="output directory (default: results)")
        p.add_argument("--format", choices=("csv", "json", "svg"), default="csv")
        p.add_argument("--jobs", type=_positive, default=1, help="worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = experiment_config(args.experiment, args.config, args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        table = run_experiment(cfg, jobs=args.jobs)
    except InvariantViolation as exc:
        print(f"numerical invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    try:
        paths = emit_outputs(table, args.format, args.out)
    except OSError as exc:
        print(f"cannot write outputs: {exc}", file=sys.stderr)
        return 1
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
