import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from svgp import dataio
from svgp.dataio import ConstantColumnError, NormalizationRecord
from svgp.errors import ConfigError, DataError


def write(tmp_path, text, name="d.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_three_row_readback(tmp_path):
    p = write(tmp_path, "a,b,y\n1,2,10\n3,5,20\n4,6,60\n")
    data = dataio.load_csv(p, "y")
    assert data.feature_names == ("a", "b")
    np.testing.assert_allclose(data.raw_X(), [[1, 2], [3, 5], [4, 6]], atol=1e-14)
    np.testing.assert_allclose(data.latent_y(), [10, 20, 60], atol=1e-12)
    assert data.n_dropped == 0
    np.testing.assert_allclose(data.X.mean(axis=0), 0, atol=1e-15)
    np.testing.assert_allclose(data.X.std(axis=0), 1, rtol=1e-14)


def test_feature_selection_and_order(tmp_path):
    p = write(tmp_path, "a,b,y\n1,2,10\n3,5,20\n4,7,60\n")
    data = dataio.load_csv(p, "y", ["b", "a"])
    np.testing.assert_allclose(data.raw_X()[:, 0], [2, 5, 7])


def test_bad_rows_are_dropped_and_counted(tmp_path):
    p = write(tmp_path, "a,y\n1,10\nx,20\n2,\n3,nan\n4,inf\n\n5,30\n6,1\n")
    data = dataio.load_csv(p, "y")
    assert data.n == 3 and data.n_dropped == 4


def test_log_target_drops_nonpositive(tmp_path):
    p = write(tmp_path, "a,y\n1,10\n2,0\n3,100\n4,-1\n5,1000\n")
    data = dataio.load_csv(p, "y", log_target=True)
    assert data.n_dropped == 2
    np.testing.assert_allclose(data.latent_y(), np.log([10, 100, 1000]))
    np.testing.assert_allclose(data.norm.inverse_y(data.y), [10, 100, 1000], rtol=1e-12)


def test_constant_column_named(tmp_path):
    p = write(tmp_path, "a,b,y\n1,7,1\n2,7,2\n3,7,4\n")
    with pytest.raises(ConstantColumnError) as exc:
        dataio.load_csv(p, "y")
    assert exc.value.column == "b"
    assert isinstance(exc.value, DataError)


def test_missing_column_and_file(tmp_path):
    p = write(tmp_path, "a,y\n1,2\n2,3\n")
    with pytest.raises(ConfigError, match="target"):
        dataio.load_csv(p, "price")
    with pytest.raises(ConfigError, match="feature"):
        dataio.load_csv(p, "y", ["a", "c"])
    with pytest.raises(ConfigError):
        dataio.load_csv(tmp_path / "nope.csv", "y")


def test_no_usable_rows(tmp_path):
    with pytest.raises(DataError):
        dataio.load_csv(write(tmp_path, "a,y\nx,y\n"), "y")
    with pytest.raises(DataError):
        dataio.load_csv(write(tmp_path, "", "empty.csv"), "y")


def test_load_is_idempotent(tmp_path):
    p = write(tmp_path, "a,b,y\n1,2,10\n3,5,20\n4,6,60\n9,1,0\n")
    a, b = dataio.load_csv(p, "y"), dataio.load_csv(p, "y")
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)


def test_normalization_round_trip(rng):
    X = rng.normal(5, 3, size=(100, 4))
    t = rng.normal(-2, 10, size=100)
    rec = NormalizationRecord.fit(X, t, ["a", "b", "c", "d"])
    np.testing.assert_allclose(rec.inverse_X(rec.transform_X(X)), X, atol=1e-12)
    np.testing.assert_allclose(rec.inverse_y(rec.transform_y(t)), t, atol=1e-12)
    assert NormalizationRecord.from_dict(rec.to_dict()).to_dict() == rec.to_dict()


def test_lognormal_moments(rng):
    rec = NormalizationRecord(np.zeros(1), np.ones(1), 1.0, 0.5, log_target=True)
    mu, var = rec.inverse_moments(np.array([0.2]), np.array([0.3]))
    z = rng.standard_normal(400_000)
    samples = np.exp(1.0 + 0.5 * (0.2 + math.sqrt(0.3) * z))
    assert mu[0] == pytest.approx(samples.mean(), rel=5e-3)
    assert var[0] == pytest.approx(samples.var(), rel=2e-2)
    # naive exponentiation of the mean underestimates
    assert mu[0] > math.exp(1.0 + 0.5 * 0.2)


def test_csv_write_read_round_trip(tmp_path):
    data = dataio.synth_4d(50, seed=3)
    dataio.write_csv(tmp_path / "s.csv", data)
    back = dataio.load_csv(tmp_path / "s.csv", "y")
    np.testing.assert_allclose(back.raw_X(), data.raw_X(), atol=1e-12)
    np.testing.assert_allclose(back.latent_y(), data.latent_y(), atol=1e-12)


# -- splits ------------------------------------------------------------------


def test_half_split_of_ten_rows():
    data = dataio.normalize(dataio.synth_sin_1d(10, seed=0))
    train, test = dataio.split(data, 0.5, seed=1)
    assert train.n == test.n == 5
    rows = {tuple(r) for r in train.raw_X().round(12)} | {tuple(r) for r in test.raw_X().round(12)}
    assert len(rows) == 10


@given(n=st.integers(2, 200), frac=st.floats(0.05, 0.95), seed=st.integers(0, 10_000))
def test_split_partitions_and_uses_train_statistics(n, frac, seed):
    data = dataio.synth_sin_2d(n, seed=seed)
    n_test = round(n * frac)
    if not 1 <= n_test <= n - 1:
        with pytest.raises(ConfigError):
            dataio.split(data, frac, seed=seed)
        return
    if n - n_test == 1:
        # a single training row has no spread to normalize by
        with pytest.raises(ConstantColumnError):
            dataio.split(data, frac, seed=seed)
        return
    train, test = dataio.split(data, frac, seed=seed)
    assert train.n + test.n == n
    raw = np.vstack([train.raw_X(), test.raw_X()])
    np.testing.assert_allclose(np.sort(raw[:, 0]), np.sort(data.raw_X()[:, 0]), atol=1e-12)
    assert test.norm is train.norm
    np.testing.assert_allclose(train.X.mean(axis=0), 0, atol=1e-9)


def test_split_determinism_and_errors():
    data = dataio.synth_sin_1d(30, seed=0)
    a, b = dataio.split(data, 0.3, seed=4), dataio.split(data, 0.3, seed=4)
    assert np.array_equal(a[0].X, b[0].X) and np.array_equal(a[1].y, b[1].y)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(ConfigError):
            dataio.split(data, bad)
    with pytest.raises(ConfigError):
        dataio.split(dataio.synth_sin_1d(3, seed=0), 0.01)


# -- synthetic generators -----------------------------------------------------


def test_noise_free_generators_lie_on_the_surface():
    d1 = dataio.synth_sin_1d(100, noise_sd=0.0, seed=2)
    np.testing.assert_array_equal(d1.y, np.sin(6 * d1.X[:, 0]))
    d2 = dataio.synth_sin_2d(100, noise_sd=0.0, seed=2)
    np.testing.assert_array_equal(d2.y, np.sin(4 * d2.X[:, 0]) * np.cos(4 * d2.X[:, 1]))
    d4 = dataio.synth_4d(100, noise_sd=0.0, seed=2)
    np.testing.assert_array_equal(d4.y, dataio.synth_4d_surface(d4.X))
    dr = dataio.synth_relevance(100, noise_sd=0.0, seed=2)
    np.testing.assert_array_equal(dr.y, np.sin(1.5 * dr.X[:, 0]) + np.sin(1.5 * dr.X[:, 1]))


@pytest.mark.parametrize("name", sorted(dataio.SYNTHETIC))
def test_generators_are_seeded(name):
    gen = dataio.SYNTHETIC[name]
    a, b, c = gen(50, seed=1), gen(50, seed=1), gen(50, seed=2)
    assert np.array_equal(a.X, b.X) and np.array_equal(a.y, b.y)
    assert not np.array_equal(a.y, c.y)


def test_sin_1d_variance_matches_quadrature():
    mean = integrate.quad(lambda u: math.sin(6 * u), 0, 1)[0]
    second = integrate.quad(lambda u: math.sin(6 * u) ** 2, 0, 1)[0]
    expected = second - mean**2 + 0.3**2
    y = dataio.synth_sin_1d(100_000, noise_sd=0.3, seed=0).y
    assert np.var(y, ddof=1) == pytest.approx(expected, rel=0.02)


def test_generator_argument_checks():
    with pytest.raises(ConfigError):
        dataio.synth_sin_1d(0)
    with pytest.raises(ConfigError):
        dataio.synth_relevance(10, d=3, relevant=(0, 5))
