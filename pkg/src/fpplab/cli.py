"""Command-line interface: one subcommand per experiment kind, plus export
and report.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 empty
inlet/outlet at the requested scale.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import EXPERIMENT_KINDS, ConfigError, export, load_config, run
from .geometry import DomainGeometryError
from .lattice import DiscretizationError, EmptyTerminalError
from .store import ResultStore

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3
EXIT_EMPTY_TERMINAL = 4


def _add_run_parser(sub, kind: str):
    p = sub.add_parser(kind, help=f"run a {kind} experiment")
    p.add_argument("--config", required=True, help="experiment config JSON")
    p.add_argument("--threads", type=int, default=None, help="worker threads")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(kind=kind)
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fpplab",
        description=(
            "Lattice max-flow / min-cut experiments with random capacities"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for kind in EXPERIMENT_KINDS:
        _add_run_parser(sub, kind)
    pe = sub.add_parser("export", help="re-render stored geometry artifacts")
    pe.add_argument("--store", required=True, help="result store directory")
    pe.add_argument(
        "--what", required=True,
        choices=["cutset-plaquettes", "stream-field", "regions"],
    )
    pe.add_argument("--format", default="csv", choices=["csv", "json"])
    pr = sub.add_parser("report", help="render figures for a completed store")
    pr.add_argument("--store", required=True, help="result store directory")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            written = export(ResultStore(args.store), args.what, args.format)
            for p in written:
                print(p)
            return EXIT_OK
        if args.command == "report":
            from .reporting import render_report

            for p in render_report(ResultStore(args.store)):
                print(p)
            return EXIT_OK
        config = load_config(args.config)
        if config["kind"] != args.kind:
            raise ConfigError(
                f"config kind {config['kind']!r} does not match "
                f"subcommand {args.kind!r}"
            )
        if args.seed is not None:
            config["master_seed"] = args.seed
        store = run(config, out_dir=args.out, threads=args.threads)
        print(store.root)
        return EXIT_OK
    except (ConfigError, DomainGeometryError, FileNotFoundError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except EmptyTerminalError as exc:
        print(f"empty terminal class: {exc}", file=sys.stderr)
        return EXIT_EMPTY_TERMINAL
    except (DiscretizationError, ValueError, AssertionError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
