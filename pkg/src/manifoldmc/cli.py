"""Command line front end: run, mmd-curve, reference, diagnose.

Exit codes: 0 success, 2 invalid configuration or arguments, 1 runtime failure.
"""

import argparse
import json
import sys

from .harness import ConfigError, ExperimentConfig, diagnose, mmd_curve, run_chain, write_reference


def _load_config(args):
    try:
        with open(args.config) as fh:
            raw = json.load(fh)
    except OSError as e:
        raise ConfigError(f"cannot read config {args.config}: {e}") from e
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {args.config} is not valid JSON: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigError(f"config {args.config} must hold a JSON object")
    if args.seed is not None:
        raw["base_seed"] = args.seed
    if args.out_dir is not None:
        raw["out_dir"] = args.out_dir
    return ExperimentConfig.from_dict(raw)


def _add_config_options(p):
    p.add_argument("--config", required=True, help="path to a JSON experiment config")
    p.add_argument("--seed", type=int, default=None, help="override base_seed")
    p.add_argument("--out-dir", default=None, help="override out_dir")


def build_parser():
    parser = argparse.ArgumentParser(prog="manifoldmc")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("run", "mmd-curve", "reference"):
        _add_config_options(sub.add_parser(name))
    diag = sub.add_parser("diagnose")
    diag.add_argument("traces", nargs="+", help="trace.csv paths")
    diag.add_argument("--reference", default=None, help="reference.csv for KS projections")
    diag.add_argument("--n-proj", type=int, default=100)
    diag.add_argument("--seed", type=int, default=0)
    diag.add_argument("--out", default=None, help="write the JSON report here instead of stdout")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            res = run_chain(_load_config(args))
            print(f"trace: {res['trace_path']}")
            print(f"metrics: {res['metrics_path']}")
        elif args.command == "mmd-curve":
            res = mmd_curve(_load_config(args))
            print(f"curve: {res['curve_path']}")
            print(f"log_slope: {res['log_slope']:.6g}  r2: {res['log_r2']:.6g}")
        elif args.command == "reference":
            print(f"reference: {write_reference(_load_config(args))}")
        elif args.command == "diagnose":
            report = diagnose(args.traces, reference_path=args.reference,
                              n_proj=args.n_proj, seed=args.seed)
            text = json.dumps(report, indent=2, sort_keys=True)
            if args.out is not None:
                with open(args.out, "w") as fh:
                    fh.write(text + "\n")
            else:
                print(text)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
