"""Command-line entry point: ``figures render --spec spec.json``."""

import argparse
import sys

from .render import render
from .spec import SpecError, load_spec


def main(argv) -> int:
    ap = argparse.ArgumentParser(prog="figures",
                                 description="Render matmed CSV artifacts")
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("render", help="render a figure from a JSON spec")
    p.add_argument("--spec", required=True)
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        png, svg = render(load_spec(args.spec))
    except (SpecError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(png)
    print(svg)
    return 0


def console_entry():
    raise SystemExit(main(sys.argv[1:]))
