"""btc-lab entry point.

Usage:
    btc-lab simulate --engine mf --eta 0.5 --chi 0.7 --tmax 100
    btc-lab fixed-points --eta 1.2 --out out/
    btc-lab simulate --config out/simulate.config.json

Flags given on the command line override the values of a --config file.
"""

import argparse
import logging
import os
import sys
from typing import Any, Callable, Dict, List, Optional

from btc import core
from harness import configs
from harness.base_command import EXIT_USAGE
from harness.commands import COMMANDS

LOGGER = logging.getLogger()

LOG_LEVEL = os.environ.get("BTC_LAB_LOG_LEVEL", "INFO")
LOG_FORMAT = "%(asctime)s %(levelname)s %(threadName)s %(message)s"

# Options that steer the process rather than the computation
PROCESS_OPTIONS = ("command", "config", "threads", "log_level")


def _floats(parser: argparse.ArgumentParser, *flags: str) -> None:
    for flag in flags:
        parser.add_argument(flag, type=float, default=argparse.SUPPRESS)


def _ints(parser: argparse.ArgumentParser, *flags: str) -> None:
    for flag in flags:
        parser.add_argument(flag, type=int, default=argparse.SUPPRESS)


def _add_simulate(sub: argparse.ArgumentParser) -> None:
    sub.add_argument(
        "--engine",
        choices=[e.value for e in core.Engine],
        default=argparse.SUPPRESS,
    )
    _floats(sub, "--eta", "--chi", "--J", "--tmax", "--mx0", "--my0", "--mz0")
    _floats(sub, "--rtol", "--atol")
    sub.add_argument("--n", dest="n_sites", type=int, default=argparse.SUPPRESS)
    sub.add_argument("--samples", type=int, default=argparse.SUPPRESS)
    sub.add_argument("--strategy", default=argparse.SUPPRESS)
    sub.add_argument("--dump-rho", action="store_true", default=argparse.SUPPRESS)


def _add_fixed_points(sub: argparse.ArgumentParser) -> None:
    _floats(sub, "--eta", "--chi-min", "--chi-max")
    _ints(sub, "--chi-points")


def _add_phase_diagram(sub: argparse.ArgumentParser) -> None:
    _floats(sub, "--chi-min", "--chi-max", "--eta-min", "--eta-max")
    _ints(sub, "--chi-points", "--eta-points")


def _add_fit_decay(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--etas", type=float, nargs="*", default=argparse.SUPPRESS)
    _floats(sub, "--chi", "--tmax", "--kick")
    _ints(sub, "--samples")


def _add_coeff(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--sizes", type=int, nargs="*", default=argparse.SUPPRESS)
    _floats(sub, "--eta-min", "--eta-max")
    _ints(sub, "--eta-points")


def _add_basin(sub: argparse.ArgumentParser) -> None:
    _floats(sub, "--eta", "--chi", "--radius", "--tmax")
    _ints(sub, "--grid", "--samples")


def _add_cusp(sub: argparse.ArgumentParser) -> None:
    _floats(sub, "--eta-lo", "--eta-hi", "--tol")


COMMAND_FLAGS: Dict[str, Callable[[argparse.ArgumentParser], None]] = {
    "simulate": _add_simulate,
    "fixed-points": _add_fixed_points,
    "phase-diagram": _add_phase_diagram,
    "fit-decay": _add_fit_decay,
    "coeff": _add_coeff,
    "basin": _add_basin,
    "cusp": _add_cusp,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="btc-lab", description="Boundary time crystals with power-law dissipation"
    )
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, command_cls in COMMANDS.items():
        sub = subparsers.add_parser(name, help=command_cls.__doc__)
        sub.add_argument("--config", help="JSON config, e.g. an echoed .config.json")
        sub.add_argument(
            "--threads",
            type=int,
            default=None,
            help="worker threads (default: $BTC_LAB_THREADS, else the core count)",
        )
        sub.add_argument("--log-level", default=LOG_LEVEL)
        sub.add_argument("--out", default=argparse.SUPPRESS)
        sub.add_argument("--stem", default=argparse.SUPPRESS)
        COMMAND_FLAGS[name](sub)
    return parser


def config_values(args: argparse.Namespace) -> Dict[str, Any]:
    """Config file contents overlaid with the flags actually given."""
    values: Dict[str, Any] = {}
    if args.config is not None:
        values.update(configs.load_config_file(args.config))
    values.update({k: v for k, v in vars(args).items() if k not in PROCESS_OPTIONS})
    return values


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 2 on usage errors and 0 on --help
        return int(e.code or 0)

    logging.basicConfig(level=args.log_level.upper(), format=LOG_FORMAT)
    command_cls = COMMANDS[args.command]
    try:
        if args.threads is not None and args.threads < 1:
            raise core.ConfigError(f"threads: need at least one, got {args.threads}")
        config = configs.build_config(command_cls.config_cls, config_values(args))
    except core.ConfigError as e:
        LOGGER.error(f"{args.command}: {e}")
        print(f"btc-lab {args.command}: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    return command_cls(config, threads=args.threads).run()


if __name__ == "__main__":
    sys.exit(main())
