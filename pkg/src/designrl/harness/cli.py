"""Command-line entry point.

Subcommands: train, eval, baseline, sweep.  Config errors exit 2 with
the offending key path; training divergence exits 3.
"""

from __future__ import annotations

import argparse
import sys

from .run import (
    cmd_baseline,
    cmd_eval,
    cmd_sweep,
    cmd_train,
    load_run_config,
    parse_override_arg,
)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="designrl",
        description="Train and evaluate adaptive experimental-design agents.")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="train one agent config over its seeds")
    t.add_argument("--config", required=True, help="run config JSON")
    t.add_argument("--out", help="override the config's output directory")

    e = sub.add_parser("eval", help="evaluate saved checkpoints")
    e.add_argument("--ckpt", required=True,
                   help="checkpoint glob, e.g. 'runs/loc/*/ckpt.npz'")
    e.add_argument("--override", default=None,
                   help="generalization grid, e.g. k=1,2,3,4,5 or nu=0.005,0.01")
    e.add_argument("--rollouts", type=int, default=200)
    e.add_argument("--L", type=int, default=10_000)
    e.add_argument("--sunrise-method", choices=("A", "B", "C"), default="B")
    e.add_argument("--out", default=".", help="directory for result files")
    e.add_argument("--chunk-size", type=int, default=100_000)
    e.add_argument("--seed", type=int, default=0, help="evaluation rng seed")

    b = sub.add_parser("baseline", help="random-design reference run")
    b.add_argument("--config", required=True, help="run config JSON")
    b.add_argument("--override", default=None)
    b.add_argument("--rollouts", type=int, default=None)
    b.add_argument("--L", type=int, default=None)
    b.add_argument("--out", default=None)
    b.add_argument("--seed", type=int, default=0)

    s = sub.add_parser("sweep", help="train+eval a matrix of variants")
    s.add_argument("--matrix", required=True, help="matrix JSON")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "train":
            rc = load_run_config(args.config)
            if args.out:
                rc.out = args.out
            return cmd_train(rc)
        if args.command == "eval":
            cmd_eval(args.ckpt, parse_override_arg(args.override),
                     args.rollouts, args.L, args.out, args.sunrise_method,
                     args.chunk_size, args.seed)
            return 0
        if args.command == "baseline":
            rc = load_run_config(args.config)
            if args.override is not None:
                rc.eval.overrides = parse_override_arg(args.override)
            if args.rollouts is not None:
                rc.eval.rollouts = args.rollouts
            if args.L is not None:
                rc.eval.L = args.L
            cmd_baseline(rc, out_dir=args.out, eval_seed=args.seed)
            return 0
        if args.command == "sweep":
            cmd_sweep(args.matrix)
            return 0
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    raise AssertionError("unreachable")


if __name__ == "__main__":
    sys.exit(main())
