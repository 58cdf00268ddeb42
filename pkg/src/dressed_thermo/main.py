"""Main script that will be called with `dressed-thermo`."""

import argparse
import logging
import os

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser() -> argparse.ArgumentParser:
    """Argument parser with one subcommand per experiment and the utilities."""
    global_parser = argparse.ArgumentParser(add_help=False)
    global_parser.add_argument(
        "--config",
        "-c",
        type=str,
        default="scenario.cfg",
        help="Scenario file, or the name of a packaged scenario",
    )
    global_parser.add_argument("--debug", action="store_true", help="Debug logging")

    run_parser = argparse.ArgumentParser(add_help=False)
    run_parser.add_argument("--out", type=str, help="Output directory")
    run_parser.add_argument("--seed", type=int, help="Random seed")
    run_parser.add_argument("--threads", type=int, help="Worker threads")

    parser = argparse.ArgumentParser(prog="dressed-thermo")
    sub_parsers = parser.add_subparsers(dest="command")
    sub_parsers.add_parser(
        "spectrum", parents=[global_parser, run_parser], help="DS-ODMR spectrum and fit"
    )
    sub_parsers.add_parser(
        "robustness",
        parents=[global_parser, run_parser],
        help="Field robustness map and line scan",
    )
    sub_parsers.add_parser(
        "thermal", parents=[global_parser, run_parser], help="Heat diffusion in the strip"
    )
    sub_parsers.add_parser(
        "time-resolved",
        parents=[global_parser, run_parser],
        help="Pump-probe temperature traces",
    )
    sub_parsers.add_parser("init", parents=[global_parser], help="Write a scenario file")
    sub_parsers.add_parser("check", parents=[global_parser], help="Validate a scenario")
    sub_parsers.add_parser("describe", parents=[global_parser], help="Show a scenario")
    sub_parsers.add_parser("version", parents=[global_parser], help="Package version")

    return parser


def run(args: argparse.Namespace) -> int:
    """Execute a parsed command line and return the exit code."""
    from lib.errors import ConfigError, InvalidDriveError, NumericalError

    logger = logging.getLogger(__name__)
    logger.debug(f"Subcommand: {args.command}")

    try:
        if args.command == "version":
            from importlib.metadata import version

            print(f"dressed-thermo {version('dressed-thermo')}")
        elif args.command == "init":
            from lib.interactive import configure_interactively

            configure_interactively(args.config)
        elif args.command == "check":
            from lib.check import check_config
            from lib.experiments import scenario_path

            if not check_config(scenario_path(args.config)):
                return EXIT_CONFIG
        elif args.command == "describe":
            from lib.cfg import load_config, print_config
            from lib.experiments import scenario_path

            print_config(load_config(scenario_path(args.config)))
        else:
            from threading import Event

            from lib.experiments import COMMANDS, load_experiment
            from lib.signal import setup_signal_handler

            exp = load_experiment(
                args.config, args.command, args.out, args.seed, args.threads
            )
            stop_event = Event()
            setup_signal_handler(stop_event)

            written = COMMANDS[args.command](exp, stop_event)
            for path in written:
                print(os.path.relpath(path))
    except (ConfigError, InvalidDriveError) as e:
        diagnostics = e.diagnostics if isinstance(e, ConfigError) else [str(e)]
        for diagnostic in diagnostics:
            logger.error(diagnostic)
        return EXIT_CONFIG
    except NumericalError as e:
        logger.error(f"Numerical failure: {e}")
        return EXIT_NUMERICAL
    except Exception as e:
        logger.exception(f"Failure of {e}")
        return EXIT_FAILURE

    return EXIT_OK


def main():
    """Execute main function."""
    parser = build_parser()
    p_args = parser.parse_args()

    if p_args.command is None:
        parser.print_help()
        exit(EXIT_OK)

    logging.basicConfig(
        level=logging.DEBUG if p_args.debug else logging.INFO,
        format="%(asctime)s - %(name)s - [%(levelname)s] - %(message)s",
    )

    exit(run(p_args))
