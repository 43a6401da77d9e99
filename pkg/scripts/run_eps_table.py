#!/usr/bin/env python3
"""Mean-rank table: pdts vs epsilon-greedy at four exploration levels on a
synthetic screening library. Prints the table and writes rank_table.txt.
"""

import argparse

from batchscreen.cli import bench_eps_table1


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="bench-eps-table1")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--reps", type=int, default=50)
    parser.add_argument("--pool-size", type=int, default=4_000)
    parser.add_argument("--batch-size", type=int, default=50)
    parser.add_argument("--iterations", type=int, default=10)
    parser.add_argument("--epochs", type=int, default=15)
    args = parser.parse_args()
    bench_eps_table1(
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
