"""Command-line entry point for the embedding exporter."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .export import ExportError, ExportJob, export


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="refrev-export",
        description="Export transformer token embeddings to a REFREVE1 file.")
    parser.add_argument("--corpus", type=Path, required=True)
    parser.add_argument("--model", type=str, required=True,
                        help="checkpoint name or local path")
    parser.add_argument("--out", type=Path, required=True)
    parser.add_argument("--layers", type=str, default="last4",
                        help="hidden layers to mean-pool, e.g. last4 or last1")
    parser.add_argument("--batch-size", type=int, default=8)
    parser.add_argument("--max-length", type=int, default=512)
    parser.add_argument("--device", type=str, default="cpu")
    args = parser.parse_args(argv)
    job = ExportJob(corpus=args.corpus, model=args.model, out=args.out,
                    layers=args.layers, batch_size=args.batch_size,
                    max_length=args.max_length, device=args.device)
    try:
        summary = export(job)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return 2
    print(json.dumps(summary))
    return 0


if __name__ == "__main__":
    sys.exit(main())
