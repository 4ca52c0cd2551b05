"""Command line entry point: ``bhquench MODE --config PATH [--override key=value ...]``."""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

import yaml

from .analytic import MottValidityError
from .config import MODES, ConfigError, apply_overrides, validate
from .dynamics import IntegrationError
from .ed import BasisTooLarge, KrylovError
from .runner import execute

OUTPUT_DIR_ENV = "BHQUENCH_OUTPUT_DIR"

EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bhquench", description="Bose-Hubbard Mott quench simulator")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress at INFO level")
    sub = parser.add_subparsers(dest="mode", required=True)
    for mode in MODES:
        p = sub.add_parser(mode, help=f"run in {mode} mode")
        p.add_argument("--config", type=Path, help="YAML configuration file")
        p.add_argument(
            "--output-dir", type=Path, help=f"output directory (overrides ${OUTPUT_DIR_ENV} and the config)"
        )
        p.add_argument(
            "--override", action="append", default=[], metavar="KEY=VALUE", help="set a config key (repeatable)"
        )
    return parser


def load(args) -> tuple[dict, Path | None]:
    data = {}
    if args.config is not None:
        data = yaml.safe_load(args.config.read_text(encoding="utf-8")) or {}
        if not isinstance(data, dict):
            raise ConfigError([f"{args.config}: top level must be a mapping"])
    data = apply_overrides(data, args.override)
    data["mode"] = args.mode
    out = args.output_dir
    if out is None and os.environ.get(OUTPUT_DIR_ENV):
        out = Path(os.environ[OUTPUT_DIR_ENV])
    return data, out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        data, out = load(args)
        config = validate(data)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, yaml.YAMLError) as exc:
        print(f"cannot read configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        manifest = execute(config, out)
    except (IntegrationError, MottValidityError, BasisTooLarge, KrylovError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    dest = out if out is not None else Path(config.output_dir)
    print(f"{config.mode}: wrote {', '.join(manifest['outputs'])} to {dest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
