"""Inverse lengthscales on data where only two of eight features matter.

    python scripts/ard_relevance.py --seeds 10
"""

import argparse

import numpy as np

from svgp import experiments


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--seeds", type=int, default=10)
    args = p.parse_args()

    hits = 0
    for seed in range(args.seeds):
        inv = experiments.ard_relevance(seed)
        top = sorted(np.argsort(-inv)[:2].tolist())
        hits += top == [0, 1]
        print(f"seed {seed}: top2 {top}  1/l = " + " ".join(f"{v:.3f}" for v in inv))
    print(f"relevant pair on top in {hits}/{args.seeds} seeds")


if __name__ == "__main__":
    main()
