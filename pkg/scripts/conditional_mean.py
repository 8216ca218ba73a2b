"""Average of the randomized rank statistic over theta, for fixed rankings.

Prints the Monte Carlo mean next to the classical statistic and next to
sum_i ||V_i - Jbar 1||^2 / (n s2), which is r - 1 for Friedman scores.
"""

import argparse

import numpy as np

from randstat.core import RandomSource, sample_rankings, sample_sphere
from randstat.rank import classical_rank_statistic, friedman_score, rank_statistics, score_vectors


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=30)
    ap.add_argument("--r", type=int, default=4)
    ap.add_argument("--draws", type=int, default=100_000)
    ap.add_argument("--datasets", type=int, default=5)
    args = ap.parse_args()

    score = friedman_score(args.r)
    for k in range(args.datasets):
        rankings = sample_rankings(args.n, args.r, RandomSource(k))
        theta = sample_sphere(args.n, RandomSource(k, (1,)), size=args.draws)
        batch = np.broadcast_to(rankings.rows, (args.draws, args.n, args.r))
        draws = rank_statistics(batch, score, theta)
        centered = score_vectors(rankings, score) - score.mean
        diag = np.sum(centered**2) / (args.n * score.variance)
        se = draws.std(ddof=1) / np.sqrt(args.draws)
        classical = classical_rank_statistic(rankings, score).statistic
        print(f"dataset {k}: mean {draws.mean():.4f} +- {se:.4f}   classical {classical:.4f}   diagonal {diag:.4f}")


if __name__ == "__main__":
    main()
