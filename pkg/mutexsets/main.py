#!/usr/bin/env python3

import argparse
import logging
import sys

from mutexsets.utils.constants import (
    APP_NAME,
    APP_VERSION,
    CORRECTION_METHODS,
    DEFAULT_ALPHA_WEIGHTS,
    DEFAULT_CLOSURE_BUDGET,
    DEFAULT_CORRECTION,
    DEFAULT_KMAX,
    DEFAULT_LEVEL,
    DEFAULT_MAX_ITER,
    DEFAULT_SEED,
    DEFAULT_WORKERS,
    EXIT_DATA,
    EXIT_OK,
    EXIT_USAGE,
)
from mutexsets.utils.errors import BudgetError, ConfigError, DataError

logger = logging.getLogger("mutexsets")


class UsageExit(Exception):
    def __init__(self, status):
        super().__init__(status)
        self.status = status


class ArgumentParser(argparse.ArgumentParser):
    """argparse parser whose usage errors exit with status 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise UsageExit(EXIT_USAGE)

    def exit(self, status=0, message=None):
        if message:
            sys.stderr.write(message)
        raise UsageExit(status)


def _add_common(parser):
    verbosity = parser.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", dest="verbosity", action="store_const", const=1, default=0,
                           help="Log debugging details")
    verbosity.add_argument("-q", "--quiet", dest="verbosity", action="store_const", const=-1,
                           help="Only log warnings and errors; no progress bars")


def build_parser():
    parser = ArgumentParser(
        prog=APP_NAME,
        description="Find significantly anti-co-occurring sets of alterations in a binary matrix",
    )
    parser.add_argument("--version", action="version", version=f"{APP_NAME} {APP_VERSION}")
    commands = parser.add_subparsers(dest="command", required=True, parser_class=ArgumentParser)

    run = commands.add_parser("run", help="Run the full analysis")
    run.add_argument("--matrix", required=True, help="Alteration matrix TSV")
    run.add_argument("--groups", required=True, help="Sample groups TSV")
    run.add_argument("--out", required=True, help="Output directory")
    run.add_argument("--kmax", type=int, default=DEFAULT_KMAX, help="Largest set size")
    run.add_argument("--max-iter", type=int, default=DEFAULT_MAX_ITER, help="Greedy iterations in total")
    run.add_argument("--alpha-weights", type=float, default=DEFAULT_ALPHA_WEIGHTS, help="Weight parameter")
    run.add_argument("--level", type=float, default=DEFAULT_LEVEL, help="Significance level")
    run.add_argument("--correction", choices=CORRECTION_METHODS, default=DEFAULT_CORRECTION)
    run.add_argument("--seed", type=int, default=DEFAULT_SEED, help="Master seed (unsigned 64-bit)")
    run.add_argument("--workers", type=int, default=DEFAULT_WORKERS, help="Worker processes for exact tests")
    run.add_argument("--closure-budget", type=int, default=DEFAULT_CLOSURE_BUDGET,
                     help="Largest number of sets after subset closure")
    run.add_argument("--pairwise-baseline", action="store_true", help="Also run the all-pairs baseline")
    run.add_argument("--dump-pool", action="store_true", help="Write the greedy candidate pool")
    run.add_argument("--pdf", action="store_true", help="Write a PDF summary")
    run.add_argument("--no-preprocess", action="store_true", help="Skip row merging and rarity filtering")
    _add_common(run)

    simulate = commands.add_parser("simulate", help="Write a simulated matrix and groups file")
    simulate.add_argument("--out", required=True, help="Output directory")
    simulate.add_argument("--group-sizes", required=True, help="Comma-separated group sizes, e.g. 100,100")
    simulate.add_argument("--rows", type=int, default=30, help="Number of rows")
    simulate.add_argument("--min-coverage", type=float, default=0.02, help="Smallest per-group coverage fraction")
    simulate.add_argument("--max-coverage", type=float, default=0.2, help="Largest per-group coverage fraction")
    simulate.add_argument("--planted", type=int, default=0, help="Size of a planted exclusive set")
    simulate.add_argument("--planted-coverage", type=int, default=100, help="Coverage of each planted row")
    simulate.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _add_common(simulate)

    test_one = commands.add_parser("test-one", help="Test a single set and print the per-group details")
    test_one.add_argument("--matrix", required=True, help="Alteration matrix TSV")
    test_one.add_argument("--groups", required=True, help="Sample groups TSV")
    test_one.add_argument("--set", required=True, help="Comma-separated row labels")
    test_one.add_argument("--kmax", type=int, default=DEFAULT_KMAX)
    test_one.add_argument("--alpha-weights", type=float, default=DEFAULT_ALPHA_WEIGHTS)
    test_one.add_argument("--seed", type=int, default=DEFAULT_SEED)
    test_one.add_argument("--no-preprocess", action="store_true")
    _add_common(test_one)
    return parser


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageExit as e:
        return e.status

    from mutexsets.app import MutexSetsApp

    try:
        MutexSetsApp(args).run()
    except ConfigError as e:
        logger.error("%s", e)
        return EXIT_USAGE
    except (DataError, BudgetError) as e:
        logger.error("%s", e)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
