"""Command-line entry point: ``pnsim run`` and ``pnsim validate``."""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from ..errors import ConfigError, PhaseNoiseError
from .config import Experiment, load_config
from .harness import bcrb_profiles, rows_from_result, simulate
from .output import emit_csv, emit_plot_data, emit_profiles

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pnsim", description="Monte-Carlo phase-noise estimation experiments"
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write results")
    run.add_argument("--config", required=True, type=Path)
    run.add_argument("--out", required=True, type=Path)
    run.add_argument("--seed", type=int, help="override master_seed")
    run.add_argument("--trials", type=int, help="override n_trials")
    run.add_argument("--parallel", type=int, default=1, help="worker processes")

    validate = sub.add_parser("validate", help="check a config file")
    validate.add_argument("--config", required=True, type=Path)
    return parser


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING)
    try:
        cfg = load_config(args.config)
        if args.command == "run":
            cfg = cfg.with_overrides(master_seed=args.seed, n_trials=args.trials)
    except ConfigError as exc:
        print(f"config error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.experiment.value}, {cfg.trials} trials per SNR)")
        return EXIT_OK

    try:
        if args.parallel < 1:
            raise ValueError("--parallel must be at least 1")
        result = simulate(cfg, parallel=args.parallel)
        rows = rows_from_result(result)
        args.out.mkdir(parents=True, exist_ok=True)
        emit_csv(rows, args.out / "results.csv")
        emit_plot_data(rows, args.out)
        if cfg.experiment is Experiment.MSE_VS_BCRB:
            emit_profiles(bcrb_profiles(result), args.out)
    except (PhaseNoiseError, OSError, ValueError) as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {len(rows)} rows to {args.out / 'results.csv'}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
