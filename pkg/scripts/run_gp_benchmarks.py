#!/usr/bin/env python3
"""Regret comparison of batch methods on the synthetic global-optimization
objectives. Produces per-objective trace directories plus metrics.csv under
--out; aggregate with `batchscreen report <out>/<objective>`.

Full scale (20 reps x 4 objectives x 5 methods) takes a few hours on one
core; use --reps/--objectives to trim.
"""

import argparse

from batchscreen.cli import bench_gp_figure3


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench-gp-figure3")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=20)
    parser.add_argument("--objectives", default="branin,bohachevsky,gp-prior,hartmann6")
    parser.add_argument("--total-evals", type=int, default=200)
    parser.add_argument("--batch-size", type=int, default=10)
    parser.add_argument("--grid-resolution", type=int, default=100)
    args = parser.parse_args()
    bench_gp_figure3(
        args.out,
        seed=args.seed,
        reps=args.reps,
        objectives=tuple(args.objectives.split(",")),
        batch_size=args.batch_size,
        total_evals=args.total_evals,
        grid_resolution=args.grid_resolution,
    )


if __name__ == "__main__":
    main()
