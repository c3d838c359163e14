"""2-D sinusoid: SVGP bound trace and held-out RMSE against a dense GP.

    python scripts/toy_convergence.py --trace-out toy_trace.csv
"""

import argparse
import logging

from svgp import experiments


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--m", type=int, default=16)
    p.add_argument("--batch", type=int, default=100)
    p.add_argument("--iters", type=int, default=3000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-plateau-stop", action="store_true")
    p.add_argument("--trace-out")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO)

    res = experiments.toy_convergence(
        n=args.n, m=args.m, batch=args.batch, max_iters=args.iters, seed=args.seed,
        stop_on_plateau=not args.no_plateau_stop,
    )
    print(f"iterations     {len(res.trace)} ({res.trace.stop_reason}, plateau at {res.trace.plateau_iter})")
    print(f"final bound    {res.trace.bounds[-1]:.3f}")
    print(f"svgp  rmse     {res.svgp.rmse:.4f}  nlpd {res.svgp.nlpd:.4f}")
    print(f"exact rmse     {res.exact.rmse:.4f}  nlpd {res.exact.nlpd:.4f}")
    print(f"ratio          {res.svgp.rmse / res.exact.rmse:.3f}")
    if args.trace_out:
        res.trace.to_csv(args.trace_out)


if __name__ == "__main__":
    main()
