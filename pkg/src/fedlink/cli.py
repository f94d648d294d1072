"""Command-line interface.

Subcommands: ``run`` (seeded trials to trace CSVs), ``sweep`` (parameter
sweep with a summary CSV), ``bounds`` (closed-form bound overlay).  Exit
codes: 0 success, 2 infeasible configuration, 1 internal error.
"""

import argparse
import sys
from dataclasses import replace

from . import harness


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="fedlink",
        description="Digital vs analog uplink simulation for federated learning",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="key = value config file")
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument(
        "--paradigm", choices=harness.PARADIGMS, help="override the configured paradigm"
    )

    run = sub.add_parser("run", parents=[common], help="run seeded trials")
    run.add_argument("--seed", type=int, help="run this single seed only")

    sweep = sub.add_parser("sweep", parents=[common], help="run a parameter sweep")
    sweep.add_argument("--param", help="swept config key (overrides sweep_param)")
    sweep.add_argument("--values", help="comma-separated swept values")

    sub.add_parser("bounds", parents=[common], help="emit the bound overlay")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = harness.load_config(args.config)
        if args.paradigm:
            cfg = replace(cfg, paradigm=args.paradigm)
        if args.command == "run":
            if args.seed is not None:
                cfg = replace(cfg, seeds=(args.seed,))
            for warning in harness.validate_config(cfg):
                print(f"warning: {warning}", file=sys.stderr)
            for path in harness.run_command(cfg, args.out):
                print(path)
        elif args.command == "sweep":
            if args.param:
                cfg = replace(cfg, sweep_param=args.param)
            if args.values:
                cfg = replace(
                    cfg, sweep_values=tuple(v for v in args.values.split(",") if v)
                )
            print(harness.run_sweep(cfg, args.out))
        else:  # bounds
            for warning in harness.validate_config(cfg):
                print(f"warning: {warning}", file=sys.stderr)
            for path in harness.emit_bound_overlay(cfg, args.out):
                print(path)
    except harness.ConfigError as exc:
        print(f"infeasible configuration: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
