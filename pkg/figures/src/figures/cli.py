"""figures <kind> --in <glob> --out <path> [--log-y]

Exit codes: 0 success, 2 missing inputs or schema mismatch, 1 runtime failure.
"""

import argparse
import sys

from .render import KINDS, FigureSpec, InputError, render
from .schemas import SchemaMismatch


def build_parser():
    parser = argparse.ArgumentParser(prog="figures")
    parser.add_argument("kind", choices=KINDS)
    parser.add_argument("--in", dest="inputs", required=True,
                        help="glob of harness output files")
    parser.add_argument("--out", required=True, help="image output path")
    parser.add_argument("--log-y", action="store_true")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        spec = FigureSpec(kind=args.kind, inputs=args.inputs, out_path=args.out,
                          log_y=args.log_y)
        print(f"figure: {render(spec)}")
    except (InputError, SchemaMismatch) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
