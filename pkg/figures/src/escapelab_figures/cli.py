"""escapelab-render: draw a standard figure from stored run files."""

from __future__ import annotations

import argparse
import sys

from .records import FigureInputError
from .render import KINDS, FigureJob, render


def main(argv=None):
    parser = argparse.ArgumentParser(prog="escapelab-render")
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--runs", required=True, nargs="+", help="run JSON files")
    parser.add_argument("--out", required=True, help="output image path")
    args = parser.parse_args(argv)
    try:
        path, annotations = render(FigureJob(args.kind, args.runs, args.out))
    except FigureInputError as exc:
        sys.stderr.write(f"figure input error: {exc}\n")
        return 2
    print(path)
    for key, value in sorted(annotations.items()):
        print(f"{key} = {value}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
