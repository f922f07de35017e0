"""Command-line entry point.

    diffsim simulate|optimize|fidelity|bench --config <file>
            [--threads N] [--seed-offset K] --out <dir>

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

import argparse
import os
import sys

from .config import ConfigError, parse_config
from .experiments import run_bench, run_fidelity, run_optimize, run_simulate

_COMMANDS = {
    "simulate": run_simulate,
    "optimize": run_optimize,
    "fidelity": run_fidelity,
    "bench": run_bench,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="diffsim",
        description="differentiable agent-based simulation experiments")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True,
                       help="experiment config file")
        p.add_argument("--out", required=True, help="output directory")
        p.add_argument("--threads", type=int, default=1,
                       help="worker thread cap for batch evaluation")
        p.add_argument("--seed-offset", type=int, default=0,
                       help="added to every simulation seed")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = parse_config(args.config)
        os.makedirs(args.out, exist_ok=True)
        written = _COMMANDS[args.command](
            cfg, args.out, threads=args.threads,
            seed_offset=args.seed_offset)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except Exception as e:
        print(f"error: {type(e).__name__}: {e}", file=sys.stderr)
        return 3
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
