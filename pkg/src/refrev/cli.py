"""Command-line entry point.

Every subcommand reads a TOML config (``--config``), accepts a flag override
for each config key, writes its outputs atomically under ``paths.out_dir``,
and prints a one-line JSON summary. Exit codes: 0 success, 1 validation
error, 2 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import pipeline
from .config import SCHEMA, load_config
from .errors import (FormatError, MissingEmbeddingError, ParseError, RefrevError,
                     ValidationError)

SUBCOMMANDS = ("tag", "align", "classify", "filter", "corrupt", "build-contrast",
               "prompts", "rescore", "metrics", "diagnostics", "all")

_FILTER_STRATEGIES = ("no_admission", "unsupported", "buckets")


def _add_schema_flags(parser: argparse.ArgumentParser) -> None:
    for section, key, typ, _default in SCHEMA:
        if section == "rescore" and key == "strategy":
            continue  # exposed as the shared --strategy flag
        flag = "--" + key.replace("_", "-")
        if typ is bool:
            parser.add_argument(flag, dest=f"cfg::{section}::{key}",
                                action=argparse.BooleanOptionalAction, default=None)
        else:
            parser.add_argument(flag, dest=f"cfg::{section}::{key}", type=typ,
                                default=None, metavar=key.upper())


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="refrev",
        description="Reference-revision data pipeline for noisy summarization corpora.")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in SUBCOMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", type=Path, default=None)
        p.add_argument("--strategy", type=str, default=None)
        if name == "rescore":
            p.add_argument("--candidates", type=Path, default=None)
        if name == "metrics":
            p.add_argument("--summaries", type=Path, default=None)
            p.add_argument("--entailment", type=Path, default=None)
            p.add_argument("--csv", type=Path, default=None)
        _add_schema_flags(p)
    return parser


def _collect_overrides(args: argparse.Namespace) -> dict:
    overrides = {}
    for name, value in vars(args).items():
        if not name.startswith("cfg::") or value is None:
            continue
        _, section, key = name.split("::")
        overrides[(None if section == "None" else section, key)] = value
    return overrides


def dispatch(args: argparse.Namespace) -> dict:
    overrides = _collect_overrides(args)
    if args.subcommand == "rescore" and args.strategy:
        overrides[("rescore", "strategy")] = args.strategy
    config = load_config(args.config, overrides)
    if args.subcommand == "tag":
        return pipeline.run_tag(config)
    if args.subcommand == "align":
        return pipeline.run_align(config)
    if args.subcommand == "classify":
        return pipeline.run_classify(config)
    if args.subcommand == "filter":
        strategy = args.strategy or "unsupported"
        if strategy not in _FILTER_STRATEGIES:
            raise ValidationError(f"filter strategy must be one of {_FILTER_STRATEGIES}")
        return pipeline.run_filter(config, strategy)
    if args.subcommand == "corrupt":
        return pipeline.run_corrupt(config)
    if args.subcommand == "build-contrast":
        return pipeline.run_contrast(config)
    if args.subcommand == "prompts":
        return pipeline.run_prompts(config)
    if args.subcommand == "rescore":
        return pipeline.run_rescore(config, args.candidates)
    if args.subcommand == "metrics":
        return pipeline.run_metrics(config, args.summaries, args.entailment, args.csv)
    if args.subcommand == "diagnostics":
        return pipeline.run_diagnostics(config)
    return pipeline.run_all(config)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        summary = dispatch(args)
    except (ValidationError, ParseError, FormatError, MissingEmbeddingError,
            RefrevError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary, ensure_ascii=False, separators=(",", ":")))
    return 0


if __name__ == "__main__":
    sys.exit(main())
