"""figures <kind> --in ... --out ...

Kinds: trajectories (trace JSONL), k_sweep (aggregate CSV),
comparison (aggregate CSV). Exit 0 on success, 2 on bad inputs.
"""

from __future__ import annotations

import argparse
import sys

from .io import ParseError
from .render import FIGURE_KINDS, FigureJob, render


def main(argv=None) -> None:
    sys.exit(cli_main(argv))


def cli_main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="figures")
    parser.add_argument("kind", choices=FIGURE_KINDS)
    parser.add_argument("--in", dest="inputs", nargs="+", required=True,
                        help="input CSV/trace files")
    parser.add_argument("--out", required=True, help="output image path")
    parser.add_argument("--title", default="")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        job = FigureJob(kind=args.kind, inputs=tuple(args.inputs),
                        output=args.out, title=args.title)
        path = render(job)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    main()
