"""Command line front end for the embedding extractor."""

from __future__ import annotations

import argparse
import logging
import sys

from .extract import ExtractorError, extract_file

EXIT_OK = 0
EXIT_INVALID = 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="embed-extractor",
        description="Extract v_word/v_mask vectors for frame-annotated verbs "
        "into the line-delimited dataset format.",
    )
    parser.add_argument("annotations", help="line-delimited JSON annotation file")
    parser.add_argument("--model", required=True, help="pretrained model name or path")
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--out", required=True, help="output dataset path")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    args = build_parser().parse_args(argv)
    try:
        written, skipped = extract_file(
            args.annotations, args.model, args.out, batch_size=args.batch_size
        )
    except ExtractorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"wrote {written} records to {args.out} ({skipped} skipped)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
