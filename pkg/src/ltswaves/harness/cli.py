"""Command line entry point.

    ltswaves coeffs --k K --p P [--format table|csv|json]
    ltswaves converge|stability|run --config FILE [--set key=value ...] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numerical abort.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from ..stepping import InstabilityError
from . import config as cfgmod
from . import experiments

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERIC = 3


def _add_config_args(sub):
    sub.add_argument("--config", required=True, help="experiment config file")
    sub.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                     help="override a config field")
    sub.add_argument("--out", default=None, help="output directory")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="ltswaves",
        description="Local time-stepping Adams-Bashforth experiments for 1D damped waves",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    coeffs = sub.add_parser("coeffs", help="print scheme coefficients exactly")
    coeffs.add_argument("--k", type=int, required=True)
    coeffs.add_argument("--p", type=int, required=True)
    coeffs.add_argument("--format", choices=("table", "csv", "json"), default="table")
    coeffs.add_argument("--out", default=None)

    for name, descr in (("converge", "mesh-refinement convergence study"),
                        ("stability", "CFL ratio table"),
                        ("run", "single simulation with CSV outputs")):
        _add_config_args(sub.add_parser(name, help=descr))
    return parser


def _load_config(args, kind):
    cfg = cfgmod.load(args.config)
    if args.set:
        cfg = cfgmod.apply_overrides(cfg, args.set)
    if cfg.kind != kind:
        raise cfgmod.ConfigError(
            f"config kind {cfg.kind!r} does not match subcommand {kind!r}"
        )
    return cfg


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "coeffs":
            text = experiments.coeffs_output(args.k, args.p, args.format)
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                ext = "txt" if args.format == "table" else args.format
                path = os.path.join(args.out, f"coeffs_k{args.k}_p{args.p}.{ext}")
                with open(path, "w") as f:
                    f.write(text)
            else:
                sys.stdout.write(text)
            return EXIT_OK
        cfg = _load_config(args, args.command)
        if args.command == "converge":
            result = experiments.converge_experiment(cfg)
            name = "converge.csv"
        elif args.command == "stability":
            result = experiments.stability_experiment(cfg)
            name = "stability.csv"
        else:
            result = experiments.run_experiment(cfg, args.out or ".")
            name = None
        if name is not None:
            if args.out:
                os.makedirs(args.out, exist_ok=True)
                result.write(os.path.join(args.out, name))
            else:
                sys.stdout.write(result.to_csv())
        return EXIT_OK
    except (cfgmod.ConfigError, ValueError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InstabilityError as exc:
        print(f"numerical abort: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
