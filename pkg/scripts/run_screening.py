#!/usr/bin/env python3
"""Top-percentile recall curves on a synthetic screening library:
pdts vs greedy vs random selection with a Bayesian-net surrogate.
"""

import argparse

from batchscreen.cli import bench_screening_figure4


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench-screening-figure4")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=10)
    parser.add_argument("--pool-size", type=int, default=20_000)
    parser.add_argument("--batch-size", type=int, default=200)
    parser.add_argument("--iterations", type=int, default=20)
    parser.add_argument("--epochs", type=int, default=20)
    args = parser.parse_args()
    bench_screening_figure4(
        args.out,
        seed=args.seed,
        reps=args.reps,
        n_candidates=args.pool_size,
        batch_size=args.batch_size,
        n_iterations=args.iterations,
        epochs=args.epochs,
    )


if __name__ == "__main__":
    main()
