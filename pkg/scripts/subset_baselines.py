"""SVGP with m=100 against dense GPs fitted to random subsets (4-D synthetic data).

    python scripts/subset_baselines.py --sizes 500,1000 --repeats 10
"""

import argparse
import logging

from svgp import dataio, experiments, trainer


def ints(s):
    return [int(t) for t in s.split(",")]


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=20_000)
    p.add_argument("--m", type=int, default=100)
    p.add_argument("--sizes", type=ints, default=[500, 1000])
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    train, test = dataio.split(dataio.synth_4d(args.n, seed=args.seed), 0.1, seed=args.seed)
    model, _ = experiments.fit_svgp(train, args.m, experiments.SWEEP_CONFIG)
    print(f"svgp m={args.m}: mse {trainer.evaluate(model, test.X, test.y).mse:.4f}")
    for row in experiments.subset_baselines(train, test, args.sizes, args.repeats, args.seed):
        print(f"subset N={row.size}: mse {row.mean:.4f} +/- {row.spread:.4f} ({len(row.failures)} failed)")


if __name__ == "__main__":
    main()
