"""Stochastic variational training loop and held-out evaluation."""

from __future__ import annotations

import csv
import hashlib
import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import core
from .core import SvgpModel
from .errors import ConfigError, NumericalError, TrainingError

log = logging.getLogger(__name__)

# exp(+-50) is far outside any meaningful variance, lengthscale or precision
MAX_LOG_PARAM = 50.0


@dataclass
class TrainConfig:
    batch_size: int = 1000
    lr_variational: float = 0.01
    lr_hyper: float = 1e-5
    momentum_hyper: float = 0.9
    max_iters: int = 1000
    epochs: int | None = None
    freeze_hyper_first_epoch: bool = True
    freeze_hyper: bool = False
    optimize_Z: bool = False
    seed: int = 0
    plateau_window: int = 50
    plateau_tol: float = 1e-3
    stop_on_plateau: bool = True
    # Robbins-Monro decay lr / (1 + t / tau) on both learning rates when set
    lr_decay_tau: float | None = None

    def validate(self, n_total: int) -> None:
        if not 1 <= self.batch_size <= n_total:
            raise ConfigError(f"batch_size must be in [1, {n_total}], got {self.batch_size}")
        if not 0.0 < self.lr_variational <= 1.0:
            raise ConfigError(f"lr_variational must be in (0, 1], got {self.lr_variational}")
        if not self.lr_hyper >= 0.0:
            raise ConfigError(f"lr_hyper must be >= 0, got {self.lr_hyper}")
        if not 0.0 <= self.momentum_hyper < 1.0:
            raise ConfigError(f"momentum_hyper must be in [0, 1), got {self.momentum_hyper}")
        if self.max_iters < 0 or (self.epochs is not None and self.epochs < 0):
            raise ConfigError("iteration counts must be >= 0")
        if self.plateau_window < 1:
            raise ConfigError("plateau_window must be >= 1")
        if self.lr_decay_tau is not None and not self.lr_decay_tau > 0:
            raise ConfigError("lr_decay_tau must be > 0")

    def steps_per_epoch(self, n_total: int) -> int:
        return math.ceil(n_total / self.batch_size)

    def total_iters(self, n_total: int) -> int:
        if self.epochs is not None:
            return self.epochs * self.steps_per_epoch(n_total)
        return self.max_iters

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TraceRecord:
    iteration: int
    bound: float
    hyper_hash: str
    walltime_ms: float
    clamps: int


@dataclass
class TrainTrace:
    records: list = field(default_factory=list)
    clamp_count: int = 0
    plateau_iter: int | None = None
    stop_reason: str = ""

    @property
    def bounds(self) -> np.ndarray:
        return np.array([r.bound for r in self.records])

    def __len__(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        with Path(path).open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["iter", "bound", "walltime_ms", "clamps"])
            for r in self.records:
                w.writerow([r.iteration, repr(r.bound), f"{r.walltime_ms:.3f}", r.clamps])


def hyper_hash(model: SvgpModel) -> str:
    return hashlib.sha1(np.ascontiguousarray(model.hypers()).tobytes()).hexdigest()[:12]


def plateaued(bounds, window: int, tol: float) -> bool:
    """True when the mean of the last ``window`` bounds improved on the previous
    window's mean by less than ``tol`` relative to that mean's magnitude."""
    if len(bounds) < 2 * window:
        return False
    prev = float(np.mean(bounds[-2 * window : -window]))
    cur = float(np.mean(bounds[-window:]))
    return cur - prev < tol * max(abs(prev), 1e-12)


def train(model: SvgpModel, X, y, config: TrainConfig) -> tuple[SvgpModel, TrainTrace]:
    """Natural-gradient steps on q(u) plus momentum SGD on the log-hyperparameters.

    Each iteration draws the next minibatch of a per-epoch shuffle, records the
    stochastic bound at the current state, updates q(u), and then (unless
    frozen) moves the hyperparameters and optionally Z along the bound's
    gradient at the updated q(u). q(u) has no momentum.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n = X.shape[0]
    if n != y.size:
        raise ConfigError(f"X has {n} rows but y has {y.size} entries")
    if X.shape[1] != model.Z.shape[1]:
        raise ConfigError("data and inducing inputs disagree on dimension")
    if model.n_total != n:
        log.info("model represents n_total=%d points, training on %d", model.n_total, n)
    config.validate(n)

    rng = np.random.default_rng(config.seed)
    total = config.total_iters(n)
    per_epoch = config.steps_per_epoch(n)
    frozen_until = per_epoch if config.freeze_hyper_first_epoch else 0
    b = config.batch_size

    trace = TrainTrace()
    velocity = np.zeros(model.hypers().size)
    velocity_Z = np.zeros_like(model.Z)
    perm = rng.permutation(n)
    pos = 0
    t0 = time.perf_counter()
    L = model.Kmm_chol()

    for it in range(total):
        if pos >= n:
            perm = rng.permutation(n)
            pos = 0
        idx = perm[pos : pos + b]
        pos += b
        decay = 1.0 if config.lr_decay_tau is None else 1.0 / (1.0 + it / config.lr_decay_tau)
        try:
            stats = core.batch_stats(model, X[idx], y[idx], Kmm_chol=L)
            bound = core.bound_L3(model, stats)
            if not math.isfinite(bound):
                raise NumericalError(f"non-finite bound at iteration {it}")
            q_new = core.nat_grad_step(model, stats, min(1.0, config.lr_variational * decay))
            new = replace(model, q=q_new)
            update = not config.freeze_hyper and it >= frozen_until
            if update:
                g = core.hyper_grads(new, stats)
                if not np.all(np.isfinite(g)):
                    raise NumericalError(f"non-finite hyperparameter gradient at iteration {it}")
                velocity = config.momentum_hyper * velocity + config.lr_hyper * decay * g
                theta = new.hypers() + velocity
                if not np.all(np.isfinite(theta)) or np.any(np.abs(theta) > MAX_LOG_PARAM):
                    raise NumericalError(
                        f"hyperparameters diverged at iteration {it} (max |log-param| "
                        f"{np.max(np.abs(theta)):.3g}); lower lr_hyper"
                    )
                new = new.with_hypers(theta)
                if config.optimize_Z:
                    gz = core.grad_Z(replace(model, q=q_new), stats)
                    if not np.all(np.isfinite(gz)):
                        raise NumericalError(f"non-finite Z gradient at iteration {it}")
                    velocity_Z = config.momentum_hyper * velocity_Z + config.lr_hyper * decay * gz
                    if not np.all(np.isfinite(new.Z + velocity_Z)):
                        raise NumericalError(f"inducing inputs diverged at iteration {it}")
                    new = replace(new, Z=new.Z + velocity_Z)
                # factorize now so a failure leaves the previous model intact
                L = new.Kmm_chol()
        except NumericalError as exc:
            trace.stop_reason = f"aborted: {exc}"
            raise TrainingError(str(exc), model=model, trace=trace) from exc

        model = new
        trace.clamp_count += stats.n_clamped
        trace.records.append(
            TraceRecord(
                it, bound, hyper_hash(model), 1e3 * (time.perf_counter() - t0), stats.n_clamped
            )
        )
        if (
            trace.plateau_iter is None
            and it + 1 >= frozen_until + 2 * config.plateau_window
            and plateaued(trace.bounds, config.plateau_window, config.plateau_tol)
        ):
            trace.plateau_iter = it
            if config.stop_on_plateau:
                trace.stop_reason = "plateau"
                break
    else:
        trace.stop_reason = "max_iters"
    return model, trace


@dataclass
class Metrics:
    mse: float
    rmse: float
    nlpd: float

    def to_dict(self) -> dict:
        return asdict(self)


def metrics_from_moments(mean, var_obs, y) -> Metrics:
    y = np.asarray(y, float).ravel()
    if y.size == 0:
        raise ConfigError("empty test set")
    err = np.asarray(mean) - y
    mse = float(np.mean(err**2))
    var = np.maximum(np.asarray(var_obs, float), 1e-300)
    nlpd = float(np.mean(0.5 * np.log(2 * np.pi * var) + 0.5 * err**2 / var))
    return Metrics(mse, math.sqrt(mse), nlpd)


def evaluate(model: SvgpModel, X_test, y_test) -> Metrics:
    """MSE, RMSE and mean negative log predictive density of noisy targets."""
    mean, var = core.predict_svgp(model, X_test, observed=True)
    return metrics_from_moments(mean, var, y_test)
