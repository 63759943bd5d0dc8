"""Command line entry point.

``weightspace verify --config PATH [--out DIR] [--parallel] [--format csv,json,svg]``
runs the configured checks and exits 0 (all pass), 2 (a failure),
3 (inconclusive) or 1 (operational error).

``weightspace conjugate --weight NAME:PARAMS --grid LO,HI,COUNT[,log]``
streams the tabulated Young conjugate as CSV to standard output.

The environment variable ``WEIGHTSPACE_GRID_COUNT`` overrides the sample
count of default grids, including the ones used when ``--grid`` or
``--y-grid`` is omitted.
"""
from __future__ import annotations

import argparse
import logging
import sys
from typing import Optional, Sequence

from .config import FORMATS, ConfigError, parse_config
from .conjugate import auto_upper, young_conjugate
from .errors import WeightSpaceError
from .grids import GRID_COUNT_ENV, GridSpec, default_count
from .runner import EXIT_ERROR, run
from .weights import parse_weight


def _formats(text: str):
    out = [p.strip() for p in text.split(",") if p.strip()]
    bad = [p for p in out if p not in FORMATS]
    if bad or not out:
        raise argparse.ArgumentTypeError(f"formats must be drawn from {', '.join(FORMATS)}")
    return out


def _grid(text: str) -> GridSpec:
    try:
        return GridSpec.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="weightspace",
        description="Young conjugates of weight functions and numerical checks of weighted entire-function spaces.",
        epilog=f"{GRID_COUNT_ENV} overrides the default grid count ({default_count()}).",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="run the checks listed in a config file")
    v.add_argument("--config", required=True, help="path to a key = value config file")
    v.add_argument("--out", help="output directory (overrides output_dir)")
    v.add_argument("--parallel", action="store_true", help="run checks concurrently")
    v.add_argument("--format", type=_formats, help="comma-separated subset of csv,json,svg")

    c = sub.add_parser("conjugate", help="tabulate a Young conjugate as CSV")
    c.add_argument("--weight", required=True, help="weight spec, e.g. exp, power:p=2, table:0,0,1,1")
    c.add_argument("--grid", type=_grid, help="x grid lo,hi,count[,log]; default 0,20,<default count>")
    c.add_argument("--y-grid", type=_grid, help="y grid; default chosen from the slope of the weight")
    return parser


def _verify(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            cfg = parse_config(fh.read())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"cannot read config: {exc}", file=sys.stderr)
        return EXIT_ERROR
    try:
        code, summary = run(cfg, out_dir=args.out, parallel=args.parallel, formats=args.format)
    except OSError as exc:
        print(f"cannot write reports: {exc}", file=sys.stderr)
        return EXIT_ERROR
    for entry in summary["checks"]:
        print(f"{entry['check']}: {entry['verdict']}")
    print(f"overall: {summary['verdict']}")
    return code


def _conjugate(args) -> int:
    try:
        w = parse_weight(args.weight)
        x_grid = args.grid or GridSpec(0.0, 20.0, default_count())
        xs = x_grid.points()
        y_grid = args.y_grid or GridSpec(1e-6, auto_upper(w, float(xs[-1])), default_count(4096))
        gf = young_conjugate(w, y_grid, x_grid)
    except (WeightSpaceError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    sys.stdout.write(gf.to_csv())
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    if args.command == "verify":
        return _verify(args)
    return _conjugate(args)


if __name__ == "__main__":
    sys.exit(main())
