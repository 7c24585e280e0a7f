"""
Command line of chain-synthesis.

    chain-synthesis phonon --chain-length 7 --k1 1 --k2 1 --xi 1 --output-dir out
    chain-synthesis controllability --chain-length 6
    chain-synthesis synthesize target.csv --output-dir out
    chain-synthesis verify out/plan.txt
    chain-synthesis pulses out/plan.txt --rwa-ratio 0.01 --jobs 4
    chain-synthesis report out/state.csv

Exit codes: 0 success, 2 invalid input, 3 numerical failure.
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import List, Optional

import numpy as np
from pydantic import ValidationError

from .. import __version__
from ..core.error import INPUT_ERROR_EXIT_CODE, NUMERICAL_ERROR_EXIT_CODE, ChainSynthesisError
from ..core.schemas import Tolerances
from ..utils.config import Config
from ..utils.logger import get_logger, get_logger_with_basic_config
from .action import BaseCommand
from .commands import COMMANDS

logger = get_logger()


def _common_arguments() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="seed of the triple solver restarts")
    common.add_argument("--tol", type=float, default=None, help="plan tolerance (spectral norm)")
    common.add_argument("--rwa-ratio", type=float, default=None, help="mean spring strength bound, units of omega")
    common.add_argument("--output-dir", type=Path, default=Path("."), help="directory of output files")
    common.add_argument("--jobs", type=int, default=1, help="worker threads")
    common.add_argument("--verbose", action="store_true", help="log to stderr")
    return common


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="chain-synthesis",
        description="Control synthesis for tunable chains of coupled harmonic oscillators.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    common = [_common_arguments()]

    phonon = subparsers.add_parser("phonon", parents=common, help="prepare a pseudo-phonon squeezed state")
    phonon.add_argument("--chain-length", type=int, required=True)
    phonon.add_argument("--k1", type=int, default=1)
    phonon.add_argument("--k2", type=int, default=1)
    phonon.add_argument("--xi", type=float, default=1.0)
    phonon.add_argument("--use-column-variant", action="store_true")

    controllability = subparsers.add_parser(
        "controllability", parents=common, help="Lie-algebra controllability certificate"
    )
    controllability.add_argument("--chain-length", type=int, required=True)

    synthesize = subparsers.add_parser("synthesize", parents=common, help="factor a target matrix")
    synthesize.add_argument("target", type=Path, help="CSV symplectic matrix on the cradle modes")
    synthesize.add_argument("--chain-length", type=int, default=None)
    synthesize.add_argument("--use-column-variant", action="store_true")

    verify = subparsers.add_parser("verify", parents=common, help="recompute a plan residual")
    verify.add_argument("plan", type=Path)

    pulses = subparsers.add_parser("pulses", parents=common, help="compile and validate pulse schedules")
    pulses.add_argument("plan", type=Path)
    pulses.add_argument("--dt", type=float, default=None, help="integration step, units of 1/omega")

    report = subparsers.add_parser("report", parents=common, help="ellipse and negativity tables")
    report.add_argument("state", type=Path, help="CSV site-basis covariance")
    return parser


def build_command(args: argparse.Namespace, tolerances: Tolerances) -> BaseCommand:
    """
    Turn parsed arguments into a validated command
    """
    fields = dict(output_dir=args.output_dir, seed=args.seed, tolerances=tolerances, jobs=args.jobs)
    if args.command == "phonon":
        fields.update(
            chain_length=args.chain_length,
            k1=args.k1,
            k2=args.k2,
            xi=args.xi,
            use_column_variant=args.use_column_variant,
        )
    elif args.command == "controllability":
        fields.update(chain_length=args.chain_length)
    elif args.command == "synthesize":
        fields.update(
            target_file=args.target,
            chain_length=args.chain_length,
            use_column_variant=args.use_column_variant,
        )
    elif args.command in ("verify", "pulses"):
        fields.update(plan_file=args.plan)
        if args.command == "pulses":
            fields.update(dt=args.dt)
    else:
        fields.update(state_file=args.state)
    return COMMANDS[args.command](**fields)


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    if args.verbose:
        get_logger_with_basic_config(logging.DEBUG, sys.stderr)

    try:
        tolerances = Tolerances.from_config(Config(), tol_plan=args.tol, rwa_ratio=args.rwa_ratio)
        outcome = build_command(args, tolerances).execute()
    except ValidationError as error:
        print(f"Invalid input\n{error}", file=sys.stderr)
        return INPUT_ERROR_EXIT_CODE
    except ChainSynthesisError as error:
        prefix = f"[{error.stage}] " if error.stage else ""
        print(f"{prefix}{error}", file=sys.stderr)
        return error.exit_code
    except OSError as error:
        print(f"Cannot access {error.filename or 'file'}: {error.strerror or error}", file=sys.stderr)
        return INPUT_ERROR_EXIT_CODE
    except (OverflowError, FloatingPointError, np.linalg.LinAlgError) as error:
        logger.error(f"Numerical failure: {error!r}")
        print(f"Numerical failure: {error}", file=sys.stderr)
        return NUMERICAL_ERROR_EXIT_CODE

    for line in outcome.report:
        print(line)
    return outcome.exit_code


def run():
    """Console-script entry point"""
    raise SystemExit(main())


if __name__ == "__main__":
    run()
