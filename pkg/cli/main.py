from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional

from pollinglab.config import DEFAULT_WORKERS, env_int, env_str
from pollinglab.config_loader import apply_overrides, load_config
from pollinglab.errors import ConfigError, InsufficientSamplesError, NumericalError, StabilityError
from pollinglab.experiments import EXPERIMENT_KINDS, ExperimentConfig, run_experiment
from pollinglab.output import render, write_output
from pollinglab.simulate import SimConfig

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_UNSTABLE = 3

logger = logging.getLogger("pollinglab.cli")


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", default=None, help="TOML experiment file")
    parser.add_argument("--seed", type=int, default=None, help="Override the master seed")
    parser.add_argument("--reps", type=int, default=None, help="Override the number of replications")
    parser.add_argument("--cycles", type=int, default=None, help="Override cycles per replication")
    parser.add_argument("--workers", type=int, default=None, help="Replication worker processes (default: POLLINGLAB_WORKERS, else the CPU count)")
    parser.add_argument("--out", default=None, help="Output file (stdout when omitted)")
    parser.add_argument("--format", dest="output_format", choices=("csv", "pretty"), default=None)
    parser.add_argument(
        "--log-level",
        default=env_str("POLLINGLAB_LOG_LEVEL", "WARNING"),
        choices=("DEBUG", "INFO", "WARNING", "ERROR"),
    )


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        description="Polling-system lab: reproduce tables, sweep limit laws, check transforms."
    )
    subparsers = parser.add_subparsers(dest="command", required=True)

    run = subparsers.add_parser("run", help="Run the experiment described by --config.")
    _add_common(run)

    helps = {
        "table1": "SCV of the polling-instant queue length, cyclic order.",
        "table2": "Waiting-time and queue-length SCVs for asymmetric systems.",
        "table3": "As table1 under the longest-queue visit order.",
        "limit-sweep": "Scaled waiting time against the uniform limit law as S grows.",
        "pcl-check": "Pseudo-conservation law with simulated mean waits.",
        "e1l-eval": "Exact E/1-L joint PGF on a grid, with its constant and means.",
        "g1l-residual": "Functional-equation residual of the simulated G/1-L PGF.",
        "custom": "Simulate the system given in --config.",
    }
    for kind in EXPERIMENT_KINDS:
        sub = subparsers.add_parser(kind, help=helps[kind])
        _add_common(sub)
    return parser


def _resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    if args.command == "run":
        if args.config is None:
            raise ConfigError("run needs --config")
        cfg = load_config(args.config)
    elif args.config is not None:
        cfg = load_config(args.config)
        if cfg.kind != args.command:
            raise ConfigError(f"--config describes a {cfg.kind!r} experiment, not {args.command!r}")
    else:
        cfg = ExperimentConfig(
            kind=args.command,
            simulation=SimConfig(workers=env_int("POLLINGLAB_WORKERS", DEFAULT_WORKERS)),
        )
    return apply_overrides(
        cfg,
        seed=args.seed,
        replications=args.reps,
        cycles=args.cycles,
        workers=args.workers,
        output=args.out,
        output_format=args.output_format,
    )


def _exit_code(exc: BaseException) -> int:
    if isinstance(exc, StabilityError):
        return EXIT_UNSTABLE
    if isinstance(exc, (NumericalError, InsufficientSamplesError)):
        return EXIT_NUMERICAL
    return EXIT_CONFIG


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        cfg = _resolve_config(args)
        result = run_experiment(cfg)
        text = render(result, cfg.output_format)
    except (ValueError, ArithmeticError) as exc:
        code = _exit_code(exc)
        logger.error("Experiment failed", extra={"exit_code": code, "error": str(exc)})
        print(f"error: {exc}", file=sys.stderr)
        return code

    if cfg.output is None:
        sys.stdout.write(text)
    else:
        path = write_output(text, cfg.output)
        print(f"Wrote {len(result.rows)} rows to {path}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
