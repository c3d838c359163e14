"""Command line: ``svgp {train,predict,evaluate,bench-subset,ard-report,synth}``.

Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import core, dataio, exact_gp, experiments, modelfile, trainer
from .errors import ConfigError, DataError, SvgpError
from .trainer import TrainConfig

log = logging.getLogger("svgp")

EXIT_OK = 0
EXIT_CONFIG = ConfigError.exit_code
EXIT_DATA = DataError.exit_code


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _names(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _add_data_args(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("data")
    src = g.add_mutually_exclusive_group()
    src.add_argument("--data", help="headered CSV file")
    src.add_argument("--synthetic", choices=sorted(dataio.SYNTHETIC), help="generated dataset")
    g.add_argument("--target-col", default="y")
    g.add_argument("--feature-cols", type=_names, help="comma-separated; default all but target")
    g.add_argument("--log-target", action="store_true", help="regress on log(target)")
    g.add_argument("--n", type=int, default=1000, help="rows for --synthetic")
    g.add_argument("--noise", type=float, help="noise sd for --synthetic (generator default if unset)")
    g.add_argument("--data-seed", type=int, help="seed for --synthetic (default: --seed)")
    g.add_argument("--test-fraction", type=float, default=0.0)


def _load_data(args) -> dataio.Dataset:
    if args.synthetic:
        kw = {} if args.noise is None else {"noise_sd": args.noise}
        seed = args.seed if args.data_seed is None else args.data_seed
        return dataio.SYNTHETIC[args.synthetic](args.n, seed=seed, **kw)
    if not args.data:
        raise ConfigError("one of --data or --synthetic is required")
    return dataio.load_csv(args.data, args.target_col, args.feature_cols, args.log_target)


def _train_test(args):
    data = _load_data(args)
    if args.test_fraction > 0:
        return dataio.split(data, args.test_fraction, seed=args.seed)
    return dataio.normalize(data), None


def _source(args) -> dict:
    if args.synthetic:
        return {"synthetic": args.synthetic, "n": args.n, "noise": args.noise}
    return {"data": str(args.data), "target": args.target_col, "log_target": args.log_target}


def cmd_train(args) -> int:
    train, test = _train_test(args)
    if not 1 <= args.m <= train.n:
        raise ConfigError(f"--m must be between 1 and the number of training rows ({train.n})")
    config = TrainConfig(
        batch_size=args.batch,
        lr_variational=args.lr_var,
        lr_hyper=args.lr_hyper,
        momentum_hyper=args.momentum,
        max_iters=args.iters,
        epochs=args.epochs,
        freeze_hyper_first_epoch=not args.no_freeze_first_epoch,
        freeze_hyper=args.freeze_hyper,
        optimize_Z=args.optimize_z,
        seed=args.seed,
        plateau_window=args.plateau_window,
        plateau_tol=args.plateau_tol,
        stop_on_plateau=not args.no_plateau_stop,
        lr_decay_tau=args.lr_decay_tau,
    )
    spec = experiments.default_spec(train.d, args.lengthscales, bias=not args.no_bias)
    model = experiments.initial_model(
        train, args.m, spec, log_beta=-math.log(args.noise_var), inducing_method=args.inducing, seed=args.seed
    )
    try:
        model, trace = trainer.train(model, train.X, train.y, config)
    except SvgpError as exc:
        trace = getattr(exc, "trace", None)
        if args.trace_out and trace is not None:
            trace.to_csv(args.trace_out)
        raise

    summary = {
        "iterations": len(trace),
        "final_bound": trace.records[-1].bound if trace.records else None,
        "stop_reason": trace.stop_reason,
        "plateau_iter": trace.plateau_iter,
        "clamp_count": trace.clamp_count,
        "n_train": train.n,
        "rows_dropped": train.n_dropped,
    }
    if test is not None:
        summary["test"] = trainer.evaluate(model, test.X, test.y).to_dict()
        summary["n_test"] = test.n
    provenance = {
        "command": "train",
        "config": config.to_dict(),
        "num_inducing": args.m,
        "inducing_init": args.inducing,
        "init_lengthscales": args.lengthscales,
        "source": _source(args),
        **summary,
    }
    if args.model_out:
        modelfile.save(
            args.model_out,
            modelfile.ModelFile(model, train.norm, train.feature_names, train.target_name, provenance),
        )
    if args.trace_out:
        trace.to_csv(args.trace_out)
    print(json.dumps(summary, default=float))
    return EXIT_OK


def _read_features(path, names) -> np.ndarray:
    text = Path(path).read_text(encoding="utf-8") if Path(path).exists() else None
    if text is None:
        raise ConfigError(f"input file {str(path)!r} does not exist")
    rows = list(csv.reader(text.splitlines()))
    rows = [r for r in rows if r and any(c.strip() for c in r)]
    if not rows:
        return np.empty((0, len(names)))
    header = [h.strip() for h in rows[0]]
    missing = [c for c in names if c not in header]
    if missing:
        raise ConfigError(f"input is missing feature columns {missing} (has {header})")
    cols = [header.index(c) for c in names]
    out = []
    for lineno, r in enumerate(rows[1:], start=2):
        try:
            out.append([float(r[j]) for j in cols])
        except (ValueError, IndexError):
            raise DataError(f"{path}:{lineno}: unparseable feature value") from None
    return np.array(out, dtype=float).reshape(len(out), len(names))


def cmd_predict(args) -> int:
    mf = modelfile.load(args.model_in)
    Xraw = _read_features(args.input, mf.feature_names)
    with open(args.output, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["mean", "variance"])
        if Xraw.shape[0]:
            mean, var = core.predict_svgp(mf.model, mf.norm.transform_X(Xraw), observed=True)
            mean, var = mf.norm.inverse_moments(mean, var)
            for a, b in zip(mean, var):
                w.writerow([repr(float(a)), repr(float(b))])
    return EXIT_OK


def cmd_evaluate(args) -> int:
    mf = modelfile.load(args.model_in)
    if args.data:
        data = dataio.load_csv(
            args.data, args.target_col or mf.target_name, list(mf.feature_names), mf.norm.log_target
        )
        Xraw, t = data.raw_X(), data.latent_y()
    else:
        if not args.synthetic:
            raise ConfigError("one of --data or --synthetic is required")
        data = _load_data(args)
        if args.test_fraction > 0:
            _, data = dataio.split(data, args.test_fraction, seed=args.seed)
        Xraw, t = data.raw_X(), data.latent_y()
    X = mf.norm.transform_X(Xraw)
    y = (t - mf.norm.y_mean) / mf.norm.y_std
    metrics = trainer.evaluate(mf.model, X, y)
    print(json.dumps({"n": int(y.size), **metrics.to_dict()}))
    return EXIT_OK


def cmd_bench_subset(args) -> int:
    data = _load_data(args)
    frac = args.test_fraction if args.test_fraction > 0 else 0.1
    train, test = dataio.split(data, frac, seed=args.seed)
    too_big = [s for s in args.sizes if s > args.cap]
    if too_big:
        raise ConfigError(f"subset sizes {too_big} exceed the dense cap {args.cap}")
    rows = experiments.subset_baselines(
        train,
        test,
        args.sizes,
        repeats=args.repeats,
        seed=args.seed,
        spec=experiments.default_spec(train.d, args.lengthscales, bias=not args.no_bias),
        settings=exact_gp.Ml2Settings(cap=args.cap),
    )
    out = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(out)
        w.writerow(["size", "mse_mean", "mse_2sd", "n_ok", "n_failed"])
        for r in rows:
            w.writerow([r.size, f"{r.mean:.6f}", f"{r.spread:.6f}", len(r.mses), len(r.failures)])
    finally:
        if out is not sys.stdout:
            out.close()
    for r in rows:
        for rep, msg in r.failures:
            print(f"size={r.size} repeat={rep} failed: {msg}", file=sys.stderr)
    return EXIT_OK


def cmd_ard_report(args) -> int:
    mf = modelfile.load(args.model_in)
    inv = experiments.inverse_lengthscales(mf.model, args.term)
    order = np.argsort(-inv, kind="stable")
    w = csv.writer(sys.stdout)
    w.writerow(["feature", "inverse_lengthscale"])
    for j in order:
        w.writerow([mf.feature_names[j], repr(float(inv[j]))])
    return EXIT_OK


def cmd_synth(args) -> int:
    kw = {} if args.noise is None else {"noise_sd": args.noise}
    data = dataio.SYNTHETIC[args.kind](args.n, seed=args.seed, **kw)
    dataio.write_csv(args.out, data)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="svgp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("train", help="fit a sparse GP by stochastic variational inference")
    _add_data_args(t)
    t.add_argument("--m", type=int, default=100, help="number of inducing points")
    t.add_argument("--inducing", choices=["kmeans", "random"], default="kmeans")
    t.add_argument("--batch", type=int, default=1000)
    t.add_argument("--iters", type=int, default=1000)
    t.add_argument("--epochs", type=int, help="overrides --iters")
    t.add_argument("--lr-var", type=float, default=0.01)
    t.add_argument("--lr-hyper", type=float, default=1e-5)
    t.add_argument("--momentum", type=float, default=0.9)
    t.add_argument("--lr-decay-tau", type=float, help="Robbins-Monro decay lr/(1+t/tau)")
    t.add_argument("--freeze-hyper", action="store_true", help="never update hyperparameters")
    t.add_argument(
        "--no-freeze-first-epoch",
        action="store_true",
        help="update hyperparameters from the first iteration",
    )
    t.add_argument("--optimize-z", action="store_true")
    t.add_argument("--lengthscales", type=_floats, default=[1.0], help="one ARD term per value")
    t.add_argument("--no-bias", action="store_true", help="drop the constant kernel term")
    t.add_argument("--noise-var", type=float, default=1.0, help="initial noise variance 1/beta")
    t.add_argument("--plateau-window", type=int, default=50)
    t.add_argument("--plateau-tol", type=float, default=1e-3)
    t.add_argument("--no-plateau-stop", action="store_true")
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--model-out")
    t.add_argument("--trace-out")
    t.set_defaults(func=cmd_train)

    pr = sub.add_parser("predict", help="predictive mean and variance in target units")
    pr.add_argument("--model-in", required=True)
    pr.add_argument("--input", required=True)
    pr.add_argument("--output", required=True)
    pr.set_defaults(func=cmd_predict)

    ev = sub.add_parser("evaluate", help="MSE, RMSE and NLPD in normalized target units")
    ev.add_argument("--model-in", required=True)
    _add_data_args(ev)
    ev.set_defaults(target_col=None)
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=cmd_evaluate)

    b = sub.add_parser("bench-subset", help="dense type-II ML GPs on random subsets")
    _add_data_args(b)
    b.add_argument("--sizes", type=_ints, default=[500, 800, 1000, 1200])
    b.add_argument("--repeats", type=int, default=10)
    b.add_argument("--lengthscales", type=_floats, default=[1.0])
    b.add_argument("--no-bias", action="store_true")
    b.add_argument("--cap", type=int, default=exact_gp.DENSE_CAP)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench_subset)

    a = sub.add_parser("ard-report", help="inverse lengthscales, most relevant first")
    a.add_argument("--model-in", required=True)
    a.add_argument("--term", type=int, help="kernel term index (default: first ARD term)")
    a.set_defaults(func=cmd_ard_report)

    s = sub.add_parser("synth", help="write a synthetic dataset as CSV")
    s.add_argument("--kind", choices=sorted(dataio.SYNTHETIC), required=True)
    s.add_argument("--n", type=int, default=1000)
    s.add_argument("--noise", type=float)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_synth)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except SvgpError as exc:
        print(f"svgp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
