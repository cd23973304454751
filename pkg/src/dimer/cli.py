"""Command-line front end.

    dimer trajectory --g -7 --kappa 0.4 --out-dir run1
    dimer sweep --g-axis=-10:0:11 --kappa-axis=0:3:13 --threads 4
    dimer fringes --config scenario.cfg
    dimer validate --level fast

Exit codes: 0 success, 1 configuration or I/O error, 2 numerical failure,
3 validation failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__
from .config import build_run_config, coerce, config_echo, read_config_file
from .errors import ConfigurationError, DimerError
from .experiments import run_fringes, run_sweep, run_trajectory
from .output import write_outputs

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_VALIDATION = 0, 1, 2, 3

# flag -> config key
FLAGS = {
    "g": "g", "kappa": "kappa", "epsilon": "epsilon", "d": "d",
    "grid_points": "grid_points", "half_width": "half_width",
    "out_dir": "out_dir", "threads": "threads", "fixed_times": "fixed_times",
    "retention": "retention", "time_step": "time_step", "cache_dir": "cache_dir",
    "g_axis": "g_axis", "kappa_axis": "kappa_axis", "times": "times", "level": "level",
}
_VALUE_FLAGS = {"--" + k.replace("_", "-") for k in FLAGS} | {"--config"}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


def _join_values(argv):
    """Allow ``--g-axis -10,0`` and ``--fixed-times -1,2``: argparse would read
    a leading minus as an option, so attach such values with '='."""
    out, i = [], 0
    while i < len(argv):
        a = argv[i]
        nxt = argv[i + 1] if i + 1 < len(argv) else ""
        if a in _VALUE_FLAGS and nxt[:1] == "-" and (nxt[1:2].isdigit() or nxt[1:2] == "."):
            out.append(f"{a}={nxt}")
            i += 2
        else:
            out.append(a)
            i += 1
    return out


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="dimer", description="Two-boson free-oscillation interferometer")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, extra in (("trajectory", ()), ("fringes", ()),
                        ("sweep", ("g_axis", "kappa_axis", "times")), ("validate", ("level",))):
        p = sub.add_parser(name)
        p.add_argument("--config", help="key = value file, or .json")
        p.add_argument("-v", "--verbose", action="store_true")
        for key in ("g", "kappa", "epsilon", "d", "grid_points", "half_width", "out_dir", "threads",
                    "fixed_times", "retention", "time_step", "cache_dir", *extra):
            p.add_argument("--" + key.replace("_", "-"), dest=key, metavar=key.upper())
    return parser


def resolve(args) -> "RunConfig":  # noqa: F821
    values = read_config_file(args.config) if args.config else {}
    if "threads" not in values and os.environ.get("DIMER_THREADS"):
        values["threads"] = coerce("threads", os.environ["DIMER_THREADS"])
    for attr, key in FLAGS.items():
        raw = getattr(args, attr, None)
        if raw is not None:
            values[key] = coerce(key, raw)
    return build_run_config(values)


def _dispatch(command: str, run) -> tuple[object, dict]:
    if command == "trajectory":
        return run_trajectory(run.scenario), config_echo(run, include_axes=False)
    if command == "fringes":
        return run_fringes(run.scenario), config_echo(run, include_axes=False)
    if command == "sweep":
        res = run_sweep(run.scenario, run.g_axis, run.kappa_axis, run.times, threads=run.threads)
        return res, config_echo(run)
    from .validation import run_validation

    return run_validation(run.level, _validation_scenario(run)), config_echo(run, include_axes=False)


def _validation_scenario(run):
    """Use the user's scenario only if it differs from the defaults."""
    from .experiments import ScenarioConfig
    from .validation import FAST_SCENARIO, FULL_SCENARIO

    if run.scenario == ScenarioConfig():
        return FAST_SCENARIO if run.level == "fast" else FULL_SCENARIO
    return run.scenario


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(_join_values(argv))
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_CONFIG
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = resolve(args)
        result, echo = _dispatch(args.command, run)
        manifest = write_outputs(result, run.out_dir, args.command, echo)
    except ConfigurationError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DimerError as exc:
        stage = f" [{exc.stage}]" if exc.stage else ""
        print(f"numerical failure{stage}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if args.command == "validate":
        print(result.summary())
        return EXIT_OK if result.passed else EXIT_VALIDATION
    for name in manifest.outputs:
        print(os.path.join(run.out_dir, name))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
