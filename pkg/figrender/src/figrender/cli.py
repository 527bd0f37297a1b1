"""figrender command line: render <figure-kind> --in <csv...> --out <path>."""

from __future__ import annotations

import argparse
import sys

from .render import KINDS, FigureSpec, render
from .tables import EmptyDataError, MissingColumnError


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="figrender",
        description="Render figures from lmgquench CSV output")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render one figure")
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--in", dest="inputs", nargs="+", required=True,
                   metavar="CSV", help="input CSV files (order-insensitive)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--linear-energy", action="store_true",
                   help="linear probability axis on the energy panel")
    p.add_argument("--linear-sweep-x", action="store_true",
                   help="linear tau_q axis on the sweep panel")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    spec = FigureSpec(inputs=tuple(args.inputs), kind=args.kind, output=args.out,
                      log_energy=not args.linear_energy,
                      log_sweep_x=not args.linear_sweep_x)
    try:
        render(spec)
    except MissingColumnError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (EmptyDataError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {args.out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
