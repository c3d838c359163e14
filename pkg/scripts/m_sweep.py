"""Held-out RMSE on the synthetic 4-D surface as the number of inducing points grows.

    python scripts/m_sweep.py --ms 5,10,20,50,100 --seeds 0,1,2
"""

import argparse
import logging

import numpy as np

from svgp import experiments


def ints(s):
    return [int(t) for t in s.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--ms", type=ints, default=[5, 10, 20, 50, 100])
    p.add_argument("--seeds", type=ints, default=[0, 1, 2])
    p.add_argument("--n", type=int, default=20_000)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    rmse = experiments.m_sweep(args.ms, args.seeds, n=args.n)
    print("m,rmse_mean,rmse_sd," + ",".join(f"seed{s}" for s in args.seeds))
    for m, vals in rmse.items():
        sd = np.std(vals, ddof=1) if len(vals) > 1 else 0.0
        print(f"{m},{np.mean(vals):.5f},{sd:.5f}," + ",".join(f"{v:.5f}" for v in vals))


if __name__ == "__main__":
    main()
