import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from svgp import inducing
from svgp.errors import ConfigError


def as_set(C):
    return sorted(map(tuple, np.round(C, 10)))


def test_m_equals_n_returns_the_points(rng):
    X = rng.standard_normal((12, 3))
    res = inducing.kmeans(X, 12, seed=0)
    assert as_set(res.centroids) == as_set(X)
    assert res.inertia == 0.0


def test_single_cluster_is_the_mean(rng):
    X = rng.standard_normal((50, 2))
    res = inducing.kmeans(X, 1, seed=3)
    np.testing.assert_allclose(res.centroids[0], X.mean(axis=0), atol=1e-14)


def brute_force_inertia(x):
    best = np.inf
    for mask in itertools.product([0, 1], repeat=len(x)):
        mask = np.array(mask, bool)
        if mask.all() or not mask.any():
            continue
        a, b = x[mask], x[~mask]
        best = min(best, ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum())
    return best


@pytest.mark.parametrize("seed", range(10))
def test_two_clusters_match_exhaustive_partition(seed):
    x = np.random.default_rng(seed).standard_normal(6)
    res = inducing.kmeans(x, 2, seed=seed)
    assert res.inertia == pytest.approx(brute_force_inertia(x), rel=1e-12)


def test_inertia_never_increases(rng):
    X = np.vstack([rng.standard_normal((100, 2)) + c for c in ([0, 0], [4, 0], [0, 4], [4, 4])])
    res = inducing.kmeans(X, 7, seed=1)
    assert len(res.history) > 1
    assert np.all(np.diff(res.history) <= 1e-9)
    assert res.inertia <= res.history[-1] + 1e-9


@given(
    X=st.integers(3, 30).flatmap(
        lambda n: arrays(np.float64, (n, 2), elements=st.floats(-10, 10, allow_nan=False), unique=True)
    ),
    m=st.integers(1, 3),
    perm_seed=st.integers(0, 1000),
)
def test_permutation_invariant(X, m, perm_seed):
    perm = np.random.default_rng(perm_seed).permutation(X.shape[0])
    a = inducing.kmeans(X, m, seed=5)
    b = inducing.kmeans(X[perm], m, seed=5)
    assert as_set(a.centroids) == as_set(b.centroids)
    assert a.inertia == pytest.approx(b.inertia, rel=1e-12, abs=1e-12)


def test_seeded_determinism(rng):
    X = rng.standard_normal((200, 3))
    a, b = inducing.kmeans(X, 10, seed=9), inducing.kmeans(X, 10, seed=9)
    assert np.array_equal(a.centroids, b.centroids)
    assert np.array_equal(a.assignment, b.assignment)


def test_duplicate_points_give_finite_centroids():
    X = np.repeat(np.array([[0.0], [1.0]]), 10, axis=0)
    res = inducing.kmeans(X, 3, seed=0)
    assert np.all(np.isfinite(res.centroids))
    assert res.inertia == 0.0


def test_too_many_clusters():
    with pytest.raises(ConfigError):
        inducing.kmeans(np.zeros((4, 1)), 5)
    with pytest.raises(ConfigError):
        inducing.random_subset(np.zeros((4, 1)), 5)


def test_random_subset_draws_rows(rng):
    X = rng.standard_normal((30, 2))
    Z = inducing.random_subset(X, 8, seed=2)
    assert Z.shape == (8, 2)
    assert set(as_set(Z)) <= set(as_set(X))


def test_init_dispatch(rng):
    X = rng.standard_normal((30, 2))
    assert inducing.init_inducing(X, 4, "kmeans").shape == (4, 2)
    assert inducing.init_inducing(X, 4, "random").shape == (4, 2)
    with pytest.raises(ConfigError):
        inducing.init_inducing(X, 4, "greedy")
