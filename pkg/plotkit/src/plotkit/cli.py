"""Command line for turning results CSVs into regret figures."""

from __future__ import annotations

import argparse
import sys

from .bundles import AGGREGATES, PlotkitError, load_results
from .render import render_regret


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="drbo-plot", description=__doc__)
    parser.add_argument("--in", dest="inputs", action="append", required=True,
                        metavar="CSV", help="results CSV (repeatable)")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--aggregate", default="mean", choices=AGGREGATES)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        bundles = load_results(args.inputs)
        render_regret(bundles, args.out, args.aggregate)
    except PlotkitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out} ({len(bundles)} curve(s))")
    return 0


if __name__ == "__main__":
    sys.exit(main())
