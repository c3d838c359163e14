"""Experiment drivers shared by the CLI, the scripts/ directory and the test suite."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from . import core, dataio, exact_gp, inducing, kernels, trainer
from .core import SvgpModel
from .dataio import Dataset
from .errors import SvgpError
from .trainer import Metrics, TrainConfig, TrainTrace

log = logging.getLogger(__name__)


def default_spec(d: int, lengthscales: Sequence[float] = (1.0,), bias: bool = True) -> kernels.KernelSpec:
    """Unit variances on z-scored data; one ARD term per initial lengthscale."""
    return kernels.build_spec(d, lengthscales=lengthscales, bias_variance=1.0 if bias else None)


def initial_model(
    data: Dataset,
    m: int,
    spec: kernels.KernelSpec | None = None,
    log_beta: float = 0.0,
    inducing_method: str = "kmeans",
    seed: int = 0,
) -> SvgpModel:
    spec = spec if spec is not None else default_spec(data.d)
    Z = inducing.init_inducing(data.X, m, method=inducing_method, seed=seed)
    return core.init_model(spec, log_beta, Z, data.n)


def fit_svgp(
    data: Dataset,
    m: int,
    config: TrainConfig,
    spec: kernels.KernelSpec | None = None,
    inducing_method: str = "kmeans",
) -> tuple[SvgpModel, TrainTrace]:
    model = initial_model(data, m, spec, inducing_method=inducing_method, seed=config.seed)
    return trainer.train(model, data.X, data.y, config)


# -- toy convergence ---------------------------------------------------------


@dataclass
class ToyResult:
    svgp: Metrics
    exact: Metrics
    trace: TrainTrace
    model: SvgpModel


def toy_convergence(
    n: int = 1000,
    m: int = 16,
    batch: int = 100,
    max_iters: int = 3000,
    n_test: int = 500,
    seed: int = 0,
    stop_on_plateau: bool = True,
) -> ToyResult:
    """2-D sinusoid: SVGP with frozen-first-epoch schedule against a dense type-II ML fit."""
    full = dataio.synth_sin_2d(n + n_test, seed=seed)
    train, test = dataio.split(full, n_test / (n + n_test), seed=seed)
    config = TrainConfig(
        batch_size=batch, max_iters=max_iters, seed=seed, stop_on_plateau=stop_on_plateau
    )
    model, trace = fit_svgp(train, m, config)
    res = exact_gp.fit_ml2(default_spec(train.d), 0.0, train.X, train.y)
    mu, var = exact_gp.predict_exact(res.gp, test.X)
    exact = trainer.metrics_from_moments(mu, var + 1.0 / res.gp.beta, test.y)
    return ToyResult(trainer.evaluate(model, test.X, test.y), exact, trace, model)


# -- inducing-count sweep ----------------------------------------------------

SWEEP_CONFIG = TrainConfig(batch_size=500, lr_variational=0.1, max_iters=800, stop_on_plateau=False)


def m_sweep(
    ms: Sequence[int] = (5, 10, 20, 50, 100),
    seeds: Sequence[int] = (0, 1, 2),
    n: int = 20_000,
    test_fraction: float = 0.1,
    config: TrainConfig = SWEEP_CONFIG,
) -> dict[int, list[float]]:
    """Held-out RMSE per number of inducing points, one entry per seed."""
    out: dict[int, list[float]] = {m: [] for m in ms}
    for seed in seeds:
        train, test = dataio.split(dataio.synth_4d(n, seed=seed), test_fraction, seed=seed)
        for m in ms:
            model, _ = fit_svgp(train, m, replace(config, seed=seed))
            rmse = trainer.evaluate(model, test.X, test.y).rmse
            log.info("m-sweep seed=%d m=%d rmse=%.4f", seed, m, rmse)
            out[m].append(rmse)
    return out


# -- random-subset baselines -------------------------------------------------


@dataclass
class SubsetRow:
    size: int
    mses: list = field(default_factory=list)
    failures: list = field(default_factory=list)

    @property
    def mean(self) -> float:
        return float(np.mean(self.mses)) if self.mses else float("nan")

    @property
    def spread(self) -> float:
        """Two standard deviations of the per-subset MSE (0 for a single repeat)."""
        if len(self.mses) < 2:
            return 0.0 if self.mses else float("nan")
        return float(2.0 * np.std(self.mses, ddof=1))


def subset_baselines(
    train: Dataset,
    test: Dataset,
    sizes: Sequence[int],
    repeats: int = 10,
    seed: int = 0,
    spec: kernels.KernelSpec | None = None,
    settings: exact_gp.Ml2Settings | None = None,
) -> list[SubsetRow]:
    """Dense GPs fitted by type-II ML on random subsets, scored on the shared test set.

    Subset draws are keyed by (seed, size, repeat) so results do not depend on
    evaluation order.
    """
    spec = spec if spec is not None else default_spec(train.d)
    rows = []
    for size in sizes:
        row = SubsetRow(int(size))
        for r in range(repeats):
            rng = np.random.default_rng([seed, int(size), r])
            idx = rng.choice(train.n, size=min(int(size), train.n), replace=False)
            try:
                res = exact_gp.fit_ml2(spec, 0.0, train.X[idx], train.y[idx], settings)
            except SvgpError as exc:
                log.warning("subset size=%d repeat=%d failed: %s", size, r, exc)
                row.failures.append((r, str(exc)))
                continue
            mu, _ = exact_gp.predict_exact(res.gp, test.X)
            row.mses.append(float(np.mean((mu - test.y) ** 2)))
        rows.append(row)
    return rows


# -- relevance determination -------------------------------------------------


def inverse_lengthscales(model: SvgpModel, term: int | None = None) -> np.ndarray:
    """1/lengthscale of an ARD term (the first one by default)."""
    ard = [i for i, t in enumerate(model.spec.terms) if isinstance(t, kernels.RbfArd)]
    if not ard:
        raise NoArdTermError("model has no ARD squared-exponential term")
    i = ard[0] if term is None else term
    t = model.spec.terms[i]
    if not isinstance(t, kernels.RbfArd):
        raise NoArdTermError(f"kernel term {i} is {t.kind}, not an ARD term")
    return np.exp(-t.log_lengthscales)


class NoArdTermError(SvgpError, LookupError):
    exit_code = 2


ARD_CONFIG = TrainConfig(batch_size=300, lr_variational=0.1, max_iters=500, stop_on_plateau=False)


def ard_relevance(
    seed: int,
    n: int = 3000,
    m: int = 30,
    d: int = 8,
    relevant: Sequence[int] = (0, 1),
    config: TrainConfig = ARD_CONFIG,
) -> np.ndarray:
    data = dataio.normalize(dataio.synth_relevance(n, d=d, relevant=relevant, seed=seed))
    model, _ = fit_svgp(data, m, replace(config, seed=seed))
    return inverse_lengthscales(model)
