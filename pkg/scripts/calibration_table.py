"""Empirical type-I error of classical vs randomized tests across n."""

import argparse
import os

from randstat import RandomSource, StatisticSpec, calibration_check


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--replicates", type=int, default=100_000)
    ap.add_argument("--alpha", type=float, default=0.05)
    ap.add_argument("--sizes", type=int, nargs="+", default=[10, 20, 50, 100, 200])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()

    specs = {
        "friedman r=3": StatisticSpec("classical_rank", r=3),
        "rand friedman r=3": StatisticSpec("randomized_rank", r=3),
        "G-test r=3": StatisticSpec("classical_phi", r=3, lam=0.0),
        "rand G-test r=3": StatisticSpec("randomized_phi", r=3, lam=0.0),
    }
    print("n     " + "".join(f"{k:>20}" for k in specs))
    for n in args.sizes:
        rates = [
            calibration_check(spec, n, args.replicates, args.alpha, RandomSource(args.seed, (n, k)),
                              workers=args.workers)
            for k, spec in enumerate(specs.values())
        ]
        print(f"{n:<6}" + "".join(f"{r:>20.4f}" for r in rates))


if __name__ == "__main__":
    main()
