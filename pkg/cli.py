"""
Command-line entry point for the ProjectCarleson system.

    python cli.py verify --all --n 3 --alpha 0 --seed 7
    python cli.py sharpness --deltas 0.4,0.2,0.1,0.05
"""
import argparse
import logging
import sys
from typing import List, Optional

from pydantic import ValidationError

from config import LOG_FORMAT, load_config, thread_count
from data.repository import get_repository, write_artifacts
from models.errors import CarlesonError
from verification.suite_manager import VERIFY_SUITES, SuiteManager

# Initialize logging
logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILURE = 1
EXIT_USAGE = 2

COMMAND_SUITES = {
    "grid": ["grid"],
    "measure": ["measure"],
    "weights": ["weights"],
    "operator": ["operators"],
    "sharpness": ["sharpness"],
}

VERIFY_FLAGS = {
    "geometry": "geometry",
    "grid": "grid",
    "measure": "measure",
    "weights": "weights",
    "operator": "operators",
}


def _deltas(text: str) -> List[float]:
    try:
        return [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON file with ExperimentConfig keys")
    common.add_argument("--n", type=int)
    common.add_argument("--alpha", type=float)
    common.add_argument("--p", type=float)
    common.add_argument("--eta", type=float)
    common.add_argument("--depth", type=int)
    common.add_argument("--systems", type=int)
    common.add_argument("--pool", type=int)
    common.add_argument("--seed", type=int)
    common.add_argument("--deltas", type=_deltas)
    common.add_argument("--gamma", type=float)
    common.add_argument("--out", help="output directory (default $CARLESON_OUTPUT_DIR or ./output)")
    common.add_argument("--family", help="load a saved family file instead of building one")
    common.add_argument("--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="carleson", description="Weighted Bergman projection toolkit on the unit ball")
    commands = parser.add_subparsers(dest="command", required=True)
    commands.add_parser("grid", parents=[common], help="build the adjacent dyadic family and check it")
    commands.add_parser("measure", parents=[common], help="box measures, collars and doubling")
    commands.add_parser("weights", parents=[common], help="Bekolle-Bonami constants of the example family")
    commands.add_parser("operator", parents=[common], help="dyadic operators, maximal functions, extrapolation")
    commands.add_parser("sharpness", parents=[common], help="growth of the operator norm along the example family")
    verify = commands.add_parser("verify", parents=[common], help="run verification suites")
    verify.add_argument("--all", action="store_true", help="every verification suite")
    for flag in VERIFY_FLAGS:
        verify.add_argument(f"--{flag}", action="store_true")
    return parser


def _selected_suites(args: argparse.Namespace) -> List[str]:
    if args.command != "verify":
        return COMMAND_SUITES[args.command]
    chosen = [suite for flag, suite in VERIFY_FLAGS.items() if getattr(args, flag)]
    return list(VERIFY_SUITES) if args.all or not chosen else chosen


def cli_main(argv: Optional[List[str]] = None) -> int:
    """
    Run one pipeline and write its artifacts.

    Returns:
        0 if every enabled check passed, 1 on a failed check or suite error, 2 on usage errors
    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_USAGE

    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO, format=LOG_FORMAT)
    overrides = {key: getattr(args, key) for key in
                 ("n", "alpha", "p", "eta", "depth", "systems", "pool", "seed", "deltas", "gamma", "out")}
    try:
        config = load_config(args.config, **overrides)
    except (ValidationError, OSError, ValueError) as e:
        logger.error(f"Invalid configuration: {str(e)}")
        return EXIT_USAGE

    repository = get_repository(config.out)
    family = None
    if args.family:
        try:
            family = repository.load_family(args.family)
        except (OSError, ValueError, CarlesonError) as e:
            logger.error(f"Cannot load family {args.family}: {str(e)}")
            return EXIT_USAGE

    manager = SuiteManager(config, threads=thread_count(), family=family)
    reports = manager.run(_selected_suites(args))
    write_artifacts(repository, reports)
    if manager.bench.has_family():
        repository.save_family(manager.bench.family)
    repository.write_manifest(config, reports, manager.claim_map(), metrics=manager.get_run_metrics(),
                              errors=manager.monitor.get_error_log(),
                              activity=manager.monitor.get_activity_log(limit=1000))

    for report in reports:
        failed = sum(1 for c in report.checks if not c.passed)
        flagged = sum(1 for c in report.checks if c.flagged)
        logger.info(f"{report.suite}: {report.status.value} ({len(report.checks)} checks, "
                    f"{failed} failed, {flagged} flagged)")
    return EXIT_OK if manager.passed else EXIT_CHECK_FAILURE


if __name__ == "__main__":
    sys.exit(cli_main())
