"""Command-line entry point: ``qgfmc <subcommand> [--config FILE] [--set key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from . import pipeline
from .config import ConfigError, dump_config, load_config
from .qsd import WORKERS_ENV

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_CONFIG = 2
EXIT_RELIABILITY = 3

COMMANDS = {
    "build-ham": (pipeline.run_build_ham, "assemble the sector Hamiltonian and its qubit form"),
    "exact": (pipeline.run_exact, "exact and fixed-node oracle spectra"),
    "qsd": (pipeline.run_qsd, "quantum subspace trials for every subspace.dt"),
    "gfmc": (pipeline.run_gfmc, "fnGFMC with the classical trial"),
    "pipeline": (pipeline.run_pipeline, "classical and quantum trials on one shared walk"),
    "sweep-shots": (pipeline.sweep_shots, "shadow shot-count sweep with repeated-seed bands"),
    "sweep-trotter": (pipeline.sweep_trotter, "Trotter step sweep against the exact backend"),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qgfmc", description="Quantum-trial fixed-node GFMC toolkit")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="flat key = value configuration file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one configuration key (repeatable)")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--workers", type=int, help=f"parallel workers (sets {WORKERS_ENV})")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.workers is not None:
        if args.workers < 1:
            print("config error: --workers must be positive", file=sys.stderr)
            return EXIT_CONFIG
        os.environ[WORKERS_ENV] = str(args.workers)
    try:
        cfg = load_config(args.config, args.set)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out or cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(dump_config(cfg), encoding="utf-8")
    run, _ = COMMANDS[args.command]
    try:
        run(cfg, out)
    except pipeline.ReliabilityError as exc:
        print(f"reliability failure: {exc}", file=sys.stderr)
        return EXIT_RELIABILITY
    except pipeline.StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    print(f"{args.command}: results in {out}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
