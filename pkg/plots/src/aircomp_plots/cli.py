"""Standalone figure-rendering command.

    aircomp-plots --spec fig5 --csv out/fig5.csv --out fig5.svg

The spec may be a bundled name (fig2..fig13) or a JSON path.
"""

from __future__ import annotations

import argparse
import sys

from .render import load_figure_spec, render


def build_parser():
    parser = argparse.ArgumentParser(prog="aircomp-plots", description="Render aircomp CSVs to figures")
    parser.add_argument("--spec", required=True, help="figure spec JSON path or bundled name")
    parser.add_argument("--csv", action="append", default=None, help="input CSV (repeatable)")
    parser.add_argument("--out", default=None, help="output image path")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = load_figure_spec(args.spec)
        result = render(spec, csv_paths=args.csv, out=args.out)
    except (ValueError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"wrote {result.out_path} ({result.n_series} series, {result.n_points} points)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
