"""rbmplot: regenerate figures from rbmsim CSV outputs.

Exit codes: 0 success, 2 bad arguments or schema mismatch.
"""

from __future__ import annotations

import argparse
import sys

from .csvio import SchemaError
from .figures import FIGURE_KINDS, FigureSpec, render


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rbmplot")
    parser.add_argument("--kind", required=True, choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="input CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image (PNG/SVG)")
    parser.add_argument("--bins", type=int, default=60,
                        help="histogram bins for the density figure")
    parser.add_argument("--no-overlay", action="store_true",
                        help="suppress the 0.2 sqrt(tau) reference line")
    parser.add_argument("--reference", default=None,
                        help="2-column density,pressure CSV overlay")
    parser.add_argument("--title", default=None)
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            inputs=args.inputs,
            output=args.out,
            bins=args.bins,
            overlay=not args.no_overlay,
            reference_csv=args.reference,
            title=args.title,
        )
        meta = render(spec)
    except (SchemaError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(meta["output"])
    if "slope" in meta:
        print(f"fitted slope: {meta['slope']:.6f}")
    for name, slope in meta.get("slopes", {}).items():
        print(f"{name} slope: {slope:.6f}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
