"""Command line for figure rendering: one verb, four figure kinds."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, RenderError, render


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="dwlan-figures", description="Render result figures")
    sub = parser.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("render", help="render one figure from a result CSV")
    p.add_argument("--kind", required=True, choices=KINDS)
    p.add_argument("--in", dest="input_csv", required=True, help="input CSV path")
    p.add_argument("--out", dest="output_path", required=True, help="output image path")
    p.add_argument("--value-col", default=None, help="value column for the CDF kind")
    p.add_argument("--title", default="")
    args = parser.parse_args(argv)
    try:
        spec = FigureSpec(
            kind=args.kind,
            input_csv=args.input_csv,
            output_path=args.output_path,
            value_column=args.value_col,
            title=args.title,
        )
        path = render(spec)
    except RenderError as exc:
        print(f"render error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
