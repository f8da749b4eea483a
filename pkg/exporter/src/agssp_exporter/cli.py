"""Export command: images plus prompts in, dataset directory out."""

from __future__ import annotations

import argparse
import sys

from .encoders import DecodeFailure, EncoderLoadFailure, ExportConfig, PRESETS
from .export import export_dataset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agssp-export",
        description="Extract patch tokens, global tokens and prompt embeddings "
        "into the dataset layout the scoring toolkit reads.",
    )
    parser.add_argument("--images", required=True, help="directory of raster images")
    parser.add_argument("--prompts", required=True, help="prompts JSON file")
    parser.add_argument("--out", required=True, help="output dataset directory")
    parser.add_argument("--preset", choices=sorted(PRESETS), default="huge")
    parser.add_argument(
        "--backend",
        choices=["seeded", "openclip"],
        default="seeded",
        help="seeded: hermetic deterministic encoder; openclip: wrap an "
        "installed open_clip model",
    )
    parser.add_argument(
        "--layers",
        help="comma-separated 1-based block indices (default: evenly spaced)",
    )
    parser.add_argument("--category-id", type=int, dest="category_id")
    parser.add_argument(
        "--refs",
        help="comma-separated image file names to mark as few-shot references",
    )
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    layer_indices = (
        [int(v) for v in args.layers.split(",")] if args.layers else []
    )
    try:
        config = ExportConfig(
            preset=args.preset, backend=args.backend, layer_indices=layer_indices
        )
        manifest_path = export_dataset(
            args.images,
            args.prompts,
            args.out,
            config,
            category_id=args.category_id,
            reference_names=args.refs.split(",") if args.refs else None,
        )
    except (ValueError, DecodeFailure, EncoderLoadFailure, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(manifest_path)
    return 0


def entrypoint() -> None:
    sys.exit(main())
