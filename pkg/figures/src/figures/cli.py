"""Command line wrapper: figures <dir> --kind snapshot|postime --out FILE."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from figures.render import KINDS, FigureSpec, RenderError, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figures",
        description="Render scenario exports as raster figures",
    )
    parser.add_argument("input_dir",
                        help="directory with ego.csv, obstacle.csv, meta.json")
    parser.add_argument("--kind", choices=KINDS, required=True)
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--interval", type=float, default=0.5,
                        help="snapshot cadence in seconds")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(kind=args.kind, input_dir=Path(args.input_dir),
                      output_path=Path(args.out),
                      snapshot_interval=args.interval)
    try:
        info = render(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 1
    if info["snapshots"] is not None:
        print(f"{info['path']} ({info['snapshots']} poses)")
    else:
        print(info["path"])
    return 0


if __name__ == "__main__":
    sys.exit(main())
