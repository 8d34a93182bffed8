"""Standalone plotting entry point: ebmbd-plot <kind> --in <dir> --out <file>."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, RenderError, render


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="ebmbd-plot",
        description="Render experiment artifacts into figures.",
    )
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="input_dir", required=True,
                        help="directory with run artifacts")
    parser.add_argument("--out", dest="output_path", required=True,
                        help="output image path")
    args = parser.parse_args(argv)
    try:
        spec = PlotSpec(kind=args.kind, input_dir=args.input_dir,
                        output_path=args.output_path)
        render(spec)
    except RenderError as exc:
        print(f"plot error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.output_path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
