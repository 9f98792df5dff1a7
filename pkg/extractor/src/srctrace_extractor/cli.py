"""Command-line entry point for batch embedding extraction."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ExtractorError
from .extract import ExtractionJob, read_audio_list, run
from .model import DEFAULT_LAYER, DEFAULT_MODEL

EXIT_OK = 0
EXIT_DATA = 2
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit 64 on usage errors, like the engine CLI
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def parse_layers(text: str) -> tuple[int, ...]:
    """Parse ``4``, ``1,2,4`` or ``1..6`` into a layer tuple."""
    layers: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, _, hi = part.partition("..")
            layers.extend(range(int(lo), int(hi) + 1))
        elif part:
            layers.append(int(part))
    if not layers:
        raise ValueError(f"no layers in {text!r}")
    return tuple(layers)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(
        prog="srctrace-extract",
        description=(
            "Mean-pool hidden states of a frozen pretrained speech model "
            "over time and write one EMB1 file per layer, plus a manifest "
            "skeleton and a rejects list."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ext = sub.add_parser("extract", help="run an extraction job")
    ext.add_argument("--model", default=DEFAULT_MODEL,
                     help="model id or local directory (default %(default)s)")
    ext.add_argument("--layers", default=str(DEFAULT_LAYER),
                     help="layer list: '4', '1,2,4' or '1..6' (default %(default)s)")
    ext.add_argument("--audio-list", required=True,
                     help="TSV of sample_id<TAB>audio_path")
    ext.add_argument("--out", required=True, help="output directory")
    ext.add_argument("--batch-size", type=int, default=8)
    ext.add_argument("--device", default="cpu")
    ext.add_argument("--max-seconds", type=float, default=90.0,
                     help="chunk-pool files longer than this (default %(default)s)")
    ext.add_argument("--chunk-seconds", type=float, default=30.0)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        layers = parse_layers(args.layers)
    except ValueError as exc:
        parser.error(str(exc))
    try:
        job = ExtractionJob(
            audio=read_audio_list(args.audio_list),
            out_dir=Path(args.out),
            model_id=args.model,
            layers=layers,
            batch_size=args.batch_size,
            device=args.device,
            max_seconds=args.max_seconds,
            chunk_seconds=args.chunk_seconds,
        )
        result = run(job)
    except (ExtractorError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    print(f"embedded {len(result.sample_ids)} samples, dim {result.dim}")
    for layer in sorted(result.emb_paths):
        print(f"  layer {layer}: {result.emb_paths[layer]}")
    print(f"  manifest skeleton: {result.manifest_path}")
    print(f"  rejects ({len(result.rejects)}): {result.rejects_path}")
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())
