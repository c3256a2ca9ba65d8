"""Command-line interface: ``analyze``, ``figure`` and ``oracle`` subcommands."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .analysis import (
    AnalysisConfig,
    emit_bounds_figure_data,
    run_analysis,
    run_oracle_suite,
    serialize,
    to_json,
)
from .errors import BoundsError, ConfigError, IdentificationError

EXIT_IDENTIFICATION = 2
EXIT_CONFIG = 3

_FLAG_KEYS = ("input", "targets", "models", "outcome_support", "min_cell_size", "grid", "out", "format", "seed")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mtebounds", description="Sharp bounds on marginal and weighted treatment effects.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="JSON file with default values for the flags below")
        p.add_argument("--input", help="CSV with columns z, d, y and optional weight, x")
        p.add_argument("--targets", help="e.g. 'late:p0,p1;ate;att;wte:weights.csv'")
        p.add_argument("--models", help="comma list of means, base, covariate, rank_sim, cond_rank_sim, linear")
        p.add_argument("--outcome-support", dest="outcome_support", help="'lo,hi' or 'none'")
        p.add_argument("--min-cell-size", dest="min_cell_size", type=int)
        p.add_argument("--grid", type=int, help="number of evenly spaced curve points")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("json", "csv"))
        p.add_argument("--seed", type=int)

    common(sub.add_parser("analyze", help="bounds for each target and model"))
    common(sub.add_parser("figure", help="bound curves for plotting"))
    oracle = sub.add_parser("oracle", help="randomized brute-force agreement checks")
    oracle.add_argument("--instances", type=int, default=500)
    oracle.add_argument("--seed", type=int, default=0)
    oracle.add_argument("--out")
    parser.add_argument("-v", "--verbose", action="store_true")
    return parser


def load_config(args: argparse.Namespace) -> AnalysisConfig:
    data = {}
    if args.config:
        path = Path(args.config)
        try:
            data = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config file must hold a JSON object")
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            data[key] = value
    return AnalysisConfig.from_mapping(data)


def _write(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        if args.command == "oracle":
            _write(to_json(run_oracle_suite(args.instances, args.seed)), args.out)
            return 0
        config = load_config(args)
        report = run_analysis(config) if args.command == "analyze" else emit_bounds_figure_data(config)
        _write(serialize(report, config.format), config.out)
        return 0
    except IdentificationError as exc:
        print(f"identification error: {exc}", file=sys.stderr)
        return EXIT_IDENTIFICATION
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BoundsError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
