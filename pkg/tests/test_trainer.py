import csv
from dataclasses import replace

import numpy as np
import pytest

from svgp import core, dataio, exact_gp, experiments, trainer
from svgp.errors import ConfigError, TrainingError
from svgp.trainer import TrainConfig


@pytest.fixture(scope="module")
def sin1d():
    return dataio.normalize(dataio.synth_sin_1d(300, seed=0))


def start(data, m=10, seed=0):
    return experiments.initial_model(data, m, seed=seed)


def test_full_batch_frozen_reaches_L2_in_two_iterations(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=sin1d.n, lr_variational=1.0, freeze_hyper=True, max_iters=6, stop_on_plateau=False)
    out, trace = trainer.train(model, sin1d.X, sin1d.y, config)
    l2 = core.bound_L2(model, sin1d.X, sin1d.y)
    b = trace.bounds
    assert np.all(np.diff(b) >= -1e-9)
    assert b[1] == pytest.approx(l2, abs=1e-8)
    assert np.array_equal(out.hypers(), model.hypers())


def test_zero_hyper_learning_rate_leaves_hypers_bitwise(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=50, lr_hyper=0.0, momentum_hyper=0.0, max_iters=30, freeze_hyper_first_epoch=False)
    out, _ = trainer.train(model, sin1d.X, sin1d.y, config)
    assert np.array_equal(out.hypers(), model.hypers())
    assert not np.array_equal(out.q.mean, model.q.mean)


def test_first_epoch_is_frozen(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=40, lr_hyper=1e-3, max_iters=20, stop_on_plateau=False)
    _, trace = trainer.train(model, sin1d.X, sin1d.y, config)
    per_epoch = config.steps_per_epoch(sin1d.n)
    assert per_epoch == 8
    hashes = [r.hyper_hash for r in trace.records]
    initial = trainer.hyper_hash(model)
    assert all(h == initial for h in hashes[:per_epoch])
    assert hashes[per_epoch] != initial


def test_optimize_z_moves_inducing_points(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=100, lr_hyper=1e-3, max_iters=10, freeze_hyper_first_epoch=False, optimize_Z=True)
    out, _ = trainer.train(model, sin1d.X, sin1d.y, config)
    assert not np.array_equal(out.Z, model.Z)
    fixed, _ = trainer.train(model, sin1d.X, sin1d.y, replace(config, optimize_Z=False))
    assert np.array_equal(fixed.Z, model.Z)


def test_determinism(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=64, lr_hyper=1e-4, max_iters=40, seed=3)
    a, ta = trainer.train(model, sin1d.X, sin1d.y, config)
    b, tb = trainer.train(model, sin1d.X, sin1d.y, config)
    assert np.array_equal(ta.bounds, tb.bounds)
    assert np.array_equal(a.hypers(), b.hypers())
    assert np.array_equal(a.q.chol, b.q.chol)


def test_epochs_override_iterations(sin1d):
    config = TrainConfig(batch_size=100, epochs=2, max_iters=1000, stop_on_plateau=False)
    _, trace = trainer.train(start(sin1d), sin1d.X, sin1d.y, config)
    assert len(trace) == 6 and trace.stop_reason == "max_iters"


def test_q_update_has_no_momentum(sin1d):
    """A unit natural step lands on the batch target regardless of history."""
    model = start(sin1d)
    config = TrainConfig(batch_size=sin1d.n, lr_variational=1.0, freeze_hyper=True, max_iters=3, stop_on_plateau=False)
    out, _ = trainer.train(model, sin1d.X, sin1d.y, config)
    opt = core.optimal_q(model, sin1d.X, sin1d.y)
    np.testing.assert_allclose(out.q.mean, opt.mean, atol=1e-8)


def test_plateau_detection():
    flat = np.r_[np.linspace(-100, -10, 50), np.full(100, -10.0)]
    assert trainer.plateaued(flat, 50, 1e-3)
    rising = np.linspace(-100, -10, 150)
    assert not trainer.plateaued(rising, 50, 1e-3)
    assert not trainer.plateaued(flat[:60], 50, 1e-3)


def test_trace_csv(sin1d, tmp_path):
    _, trace = trainer.train(start(sin1d), sin1d.X, sin1d.y, TrainConfig(batch_size=50, max_iters=5))
    trace.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader((tmp_path / "t.csv").open()))
    assert rows[0] == ["iter", "bound", "walltime_ms", "clamps"]
    assert len(rows) == 6
    assert [float(r[1]) for r in rows[1:]] == list(trace.bounds)


@pytest.mark.parametrize(
    "kw",
    [
        {"batch_size": 0},
        {"batch_size": 10_000},
        {"lr_variational": 0.0},
        {"lr_variational": 1.5},
        {"lr_hyper": -1.0},
        {"momentum_hyper": 1.0},
        {"max_iters": -1},
        {"plateau_window": 0},
        {"lr_decay_tau": 0.0},
    ],
)
def test_config_validation(sin1d, kw):
    with pytest.raises(ConfigError):
        trainer.train(start(sin1d), sin1d.X, sin1d.y, TrainConfig(**kw))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_numerical_failure_returns_last_good_model(sin1d):
    model = start(sin1d)
    config = TrainConfig(batch_size=100, lr_hyper=1e3, momentum_hyper=0.0, max_iters=50, freeze_hyper_first_epoch=False)
    with pytest.raises(TrainingError) as exc:
        trainer.train(model, sin1d.X, sin1d.y, config)
    err = exc.value
    assert err.model is not None and np.all(np.isfinite(err.model.hypers()))
    assert err.trace.stop_reason.startswith("aborted")


def test_toy_trace_rises_after_unfreeze_then_plateaus():
    full = dataio.synth_sin_2d(1000, seed=0)
    data = dataio.normalize(full)
    config = TrainConfig(batch_size=100, max_iters=2000, stop_on_plateau=False)
    _, trace = trainer.train(experiments.initial_model(data, 16), data.X, data.y, config)
    b = trace.bounds
    frozen = b[5:10].mean()
    assert b[200:300].mean() > frozen + 50  # hyperparameter learning lifts the bound
    late = b[-200:]
    assert abs(late[100:].mean() - late[:100].mean()) < 1e-3 * abs(late.mean())
    assert trace.plateau_iter is not None and trace.plateau_iter < 2000


# -- evaluation ----------------------------------------------------------------


def test_perfect_predictions_have_zero_mse():
    y = np.array([0.3, -1.0, 2.0])
    m = trainer.metrics_from_moments(y, np.ones(3), y)
    assert m.mse == 0.0 and m.rmse == 0.0
    assert m.nlpd == pytest.approx(0.5 * np.log(2 * np.pi))


def test_zero_predictor_mse_is_sample_variance(rng):
    y = rng.standard_normal(200)
    y -= y.mean()
    m = trainer.metrics_from_moments(np.zeros(200), np.ones(200), y)
    assert m.mse == pytest.approx(np.var(y), rel=1e-14)


def test_empty_test_set():
    with pytest.raises(ConfigError):
        trainer.metrics_from_moments([], [], [])


def test_mse_close_to_exact_gp_on_small_sinusoid():
    train, test = dataio.split(dataio.synth_sin_1d(400, seed=5), 0.5, seed=5)
    config = TrainConfig(batch_size=50, lr_variational=0.1, lr_hyper=1e-4, max_iters=1500, stop_on_plateau=False)
    model, _ = experiments.fit_svgp(train, 15, config)
    svgp = trainer.evaluate(model, test.X, test.y)
    res = exact_gp.fit_ml2(experiments.default_spec(1), 0.0, train.X, train.y)
    mu, _ = exact_gp.predict_exact(res.gp, test.X)
    exact_mse = float(np.mean((mu - test.y) ** 2))
    assert svgp.mse <= 1.1 * exact_mse
