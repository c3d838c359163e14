"""Initial inducing inputs: k-means++ seeded Lloyd iterations, or a random subset."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import distance

from .errors import ConfigError

MAX_LLOYD_ITERS = 100
N_INIT = 10
# restarts only while a single Lloyd run is cheap (n * m below this)
AUTO_RESTART_WORK = 1_000_000


@dataclass
class KmeansResult:
    centroids: np.ndarray
    assignment: np.ndarray
    inertia: float
    n_iter: int
    converged: bool
    history: list = field(default_factory=list)


def _sq_dists(X, C):
    """Squared Euclidean distances (cdist sums explicit coordinate differences)."""
    return distance.cdist(X, C, "sqeuclidean")


def _assign(X, C):
    D = _sq_dists(X, C)
    # argmin returns the first minimum: lowest cluster index wins ties
    a = np.argmin(D, axis=1)
    return a, D[np.arange(X.shape[0]), a]


def _plusplus(X, m, rng):
    n = X.shape[0]
    chosen = [int(rng.integers(n))]
    d2 = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, m):
        total = d2.sum()
        if total > 0:
            i = int(rng.choice(n, p=d2 / total))
        else:
            # every remaining point duplicates a center; pick any unused row
            free = np.setdiff1d(np.arange(n), chosen)
            i = int(rng.choice(free))
        chosen.append(i)
        d2 = np.minimum(d2, _sq_dists(X, X[i : i + 1])[:, 0])
    return X[chosen].copy()


def _lloyd(X, m, rng, max_iter):
    C = _plusplus(X, m, rng)
    history = []
    prev = None
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        a, d2 = _assign(X, C)
        history.append(float(d2.sum()))
        if prev is not None and np.array_equal(a, prev):
            converged = True
            break
        prev = a
        counts = np.bincount(a, minlength=m)
        sums = np.zeros_like(C)
        np.add.at(sums, a, X)
        nonempty = counts > 0
        C[nonempty] = sums[nonempty] / counts[nonempty, None]
        for k in np.flatnonzero(~nonempty):
            # re-seed at the point farthest from its own centroid
            far = int(np.argmax(d2))
            C[k] = X[far]
            d2[far] = 0.0
    a, d2 = _assign(X, C)
    return C, a, float(d2.sum()), it, converged, history


def kmeans(
    X, m: int, seed: int = 0, max_iter: int = MAX_LLOYD_ITERS, n_init: int | None = None
) -> KmeansResult:
    """Lloyd's algorithm from ``n_init`` k-means++ starts, keeping the lowest inertia.

    Deterministic given ``seed``. Rows are processed in lexicographic order, so
    the result does not depend on the order of the input rows (up to the
    labelling of the clusters). ``history`` is the inertia trace of the kept run.
    By default ``n_init`` is 10 when ``n * m`` is small and 1 otherwise; on
    large inputs a single k-means++ start is already close to the best of many.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    n = X.shape[0]
    if not 1 <= m <= n:
        raise ConfigError(f"need 1 <= m <= n for k-means, got m={m}, n={n}")
    if n_init is None:
        n_init = N_INIT if n * m <= AUTO_RESTART_WORK else 1
    if n_init < 1:
        raise ConfigError("n_init must be >= 1")
    order = np.lexsort(X.T[::-1])
    rng = np.random.default_rng(seed)
    best = None
    for _ in range(n_init):
        run = _lloyd(X[order], m, rng, max_iter)
        if best is None or run[2] < best[2]:
            best = run
        if m == n:
            break  # every start recovers the points themselves
    C, a_sorted, inertia, it, conv, hist = best
    assignment = np.empty(n, dtype=int)
    assignment[order] = a_sorted
    return KmeansResult(C, assignment, inertia, it, conv, hist)


def random_subset(X, m: int, seed: int = 0) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if not 1 <= m <= X.shape[0]:
        raise ConfigError(f"need 1 <= m <= n, got m={m}, n={X.shape[0]}")
    idx = np.random.default_rng(seed).choice(X.shape[0], size=m, replace=False)
    return X[np.sort(idx)].copy()


def init_inducing(X, m: int, method: str = "kmeans", seed: int = 0) -> np.ndarray:
    if method == "kmeans":
        return kmeans(X, m, seed).centroids
    if method == "random":
        return random_subset(X, m, seed)
    raise ConfigError(f"unknown inducing initialisation {method!r}")
