"""CSV ingestion, z-score normalization, train/test splits and synthetic datasets."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import ConfigError, DataError

log = logging.getLogger(__name__)


class ConstantColumnError(DataError):
    def __init__(self, column: str):
        super().__init__(f"column {column!r} is constant and cannot be normalized")
        self.column = column


@dataclass(frozen=True, eq=False)
class NormalizationRecord:
    x_mean: np.ndarray
    x_std: np.ndarray
    y_mean: float
    y_std: float
    log_target: bool = False

    @classmethod
    def identity(cls, d: int, log_target: bool = False) -> "NormalizationRecord":
        return cls(np.zeros(d), np.ones(d), 0.0, 1.0, log_target)

    @classmethod
    def fit(cls, X, t, feature_names, target_name="target", log_target=False):
        """Fit on features ``X`` and on targets ``t`` already in log space if ``log_target``."""
        x_mean = X.mean(axis=0)
        x_std = X.std(axis=0)
        for j, s in enumerate(x_std):
            if not s > 0:
                raise ConstantColumnError(feature_names[j])
        y_std = float(t.std())
        if not y_std > 0:
            raise ConstantColumnError(target_name)
        return cls(x_mean, x_std, float(t.mean()), y_std, log_target)

    def transform_X(self, X):
        return (np.asarray(X, float) - self.x_mean) / self.x_std

    def inverse_X(self, Xn):
        return np.asarray(Xn, float) * self.x_std + self.x_mean

    def to_latent(self, y):
        """Raw targets -> the (possibly logged) space that gets z-scored."""
        y = np.asarray(y, float)
        return np.log(y) if self.log_target else y

    def transform_y(self, y):
        return (self.to_latent(y) - self.y_mean) / self.y_std

    def inverse_y(self, yn):
        t = np.asarray(yn, float) * self.y_std + self.y_mean
        return np.exp(t) if self.log_target else t

    def inverse_moments(self, mean, var):
        """Map normalized predictive moments back to target units.

        With a log target the predictive is lognormal:
        mean exp(mu + s2/2), variance (exp(s2) - 1) exp(2 mu + s2).
        """
        mu = np.asarray(mean, float) * self.y_std + self.y_mean
        s2 = np.asarray(var, float) * self.y_std**2
        if not self.log_target:
            return mu, s2
        return np.exp(mu + 0.5 * s2), np.expm1(s2) * np.exp(2 * mu + s2)

    def to_dict(self) -> dict:
        return {
            "x_mean": self.x_mean.tolist(),
            "x_std": self.x_std.tolist(),
            "y_mean": self.y_mean,
            "y_std": self.y_std,
            "log_target": self.log_target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NormalizationRecord":
        return cls(
            np.array(d["x_mean"], float),
            np.array(d["x_std"], float),
            float(d["y_mean"]),
            float(d["y_std"]),
            bool(d["log_target"]),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Normalized inputs and targets plus the record that produced them."""

    X: np.ndarray
    y: np.ndarray
    feature_names: tuple
    norm: NormalizationRecord
    target_name: str = "target"
    n_dropped: int = 0

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def d(self) -> int:
        return self.X.shape[1]

    def raw_X(self):
        return self.norm.inverse_X(self.X)

    def latent_y(self):
        """Targets before z-scoring (log space when the target is logged)."""
        return self.y * self.norm.y_std + self.norm.y_mean

    def subset(self, idx) -> "Dataset":
        return replace(self, X=self.X[idx], y=self.y[idx], n_dropped=0)


def normalize(data: Dataset) -> Dataset:
    """Refit the z-scoring on ``data`` itself."""
    Xr, t = data.raw_X(), data.latent_y()
    rec = NormalizationRecord.fit(
        Xr, t, data.feature_names, data.target_name, data.norm.log_target
    )
    return replace(data, X=rec.transform_X(Xr), y=(t - rec.y_mean) / rec.y_std, norm=rec)


def load_csv(
    path,
    target_column: str,
    feature_columns: Sequence[str] | None = None,
    log_target: bool = False,
) -> Dataset:
    """Read a headered CSV; rows with unparseable or non-finite cells are dropped."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"data file {str(path)!r} does not exist")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path} is empty (a header row is required)") from None
        if target_column not in header:
            raise ConfigError(f"target column {target_column!r} not in header {header}")
        if feature_columns is None:
            feature_columns = [h for h in header if h != target_column]
        missing = [c for c in feature_columns if c not in header]
        if missing:
            raise ConfigError(f"feature columns {missing} not in header {header}")
        cols = [header.index(c) for c in feature_columns]
        tcol = header.index(target_column)
        rows, targets, dropped = [], [], 0
        for rec in reader:
            if not rec or all(not c.strip() for c in rec):
                continue
            try:
                x = [float(rec[j]) for j in cols]
                t = float(rec[tcol])
            except (ValueError, IndexError):
                dropped += 1
                continue
            if log_target:
                t = math.log(t) if t > 0 else math.nan
            if not (all(math.isfinite(v) for v in x) and math.isfinite(t)):
                dropped += 1
                continue
            rows.append(x)
            targets.append(t)
    if not rows:
        raise DataError(f"no usable rows in {path} ({dropped} dropped)")
    if dropped:
        log.warning("dropped %d rows with unusable values from %s", dropped, path)
    X = np.array(rows, dtype=float).reshape(len(rows), len(cols))
    t = np.array(targets, dtype=float)
    rec = NormalizationRecord.fit(X, t, list(feature_columns), target_column, log_target)
    return Dataset(
        rec.transform_X(X),
        (t - rec.y_mean) / rec.y_std,
        tuple(feature_columns),
        rec,
        target_column,
        dropped,
    )


def write_csv(path, data: Dataset) -> None:
    """Write raw (denormalized) features and target."""
    Xr = data.raw_X()
    t = data.norm.inverse_y(data.y)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(data.feature_names) + [data.target_name])
        for x, v in zip(Xr, t):
            w.writerow([repr(float(a)) for a in x] + [repr(float(v))])


def split(data: Dataset, test_fraction: float, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Random disjoint split; both parts are z-scored with train statistics."""
    if not 0.0 < test_fraction < 1.0:
        raise ConfigError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(round(data.n * test_fraction))
    if not 1 <= n_test <= data.n - 1:
        raise ConfigError(f"a {test_fraction} split of {data.n} rows leaves an empty part")
    perm = np.random.default_rng(seed).permutation(data.n)
    test_idx, train_idx = np.sort(perm[:n_test]), np.sort(perm[n_test:])
    Xr, t = data.raw_X(), data.latent_y()
    rec = NormalizationRecord.fit(
        Xr[train_idx], t[train_idx], data.feature_names, data.target_name, data.norm.log_target
    )

    def part(idx, dropped):
        return replace(
            data,
            X=rec.transform_X(Xr[idx]),
            y=(t[idx] - rec.y_mean) / rec.y_std,
            norm=rec,
            n_dropped=dropped,
        )

    return part(train_idx, data.n_dropped), part(test_idx, 0)


def _raw(X, y, names, target="y"):
    return Dataset(
        np.asarray(X, float), np.asarray(y, float), tuple(names),
        NormalizationRecord.identity(X.shape[1]), target,
    )


def synth_sin_1d(n: int, noise_sd: float = 0.3, seed: int = 0) -> Dataset:
    """x ~ U(0, 1), y = sin(6x) + noise_sd * eps. Returned unnormalized."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 1))
    y = np.sin(6.0 * x[:, 0]) + noise_sd * rng.standard_normal(n)
    return _raw(x, y, ["x0"])


def synth_sin_2d(n: int, noise_sd: float = 0.1, seed: int = 0) -> Dataset:
    """x ~ U(0, 1)^2, y = sin(4 x0) cos(4 x1) + noise_sd * eps. Returned unnormalized."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(0.0, 1.0, size=(n, 2))
    y = np.sin(4.0 * x[:, 0]) * np.cos(4.0 * x[:, 1]) + noise_sd * rng.standard_normal(n)
    return _raw(x, y, ["x0", "x1"])


def synth_4d_surface(x: np.ndarray) -> np.ndarray:
    return np.sin(2.0 * x[:, 0]) + 0.5 * x[:, 1] * x[:, 2] + 0.5 * np.cos(1.5 * x[:, 3])


def synth_4d(n: int, noise_sd: float = 1.0, seed: int = 0) -> Dataset:
    """x ~ U(-1.5, 1.5)^4 through a smooth non-additive surface, heavy noise."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    rng = np.random.default_rng(seed)
    x = rng.uniform(-1.5, 1.5, size=(n, 4))
    y = synth_4d_surface(x) + noise_sd * rng.standard_normal(n)
    return _raw(x, y, [f"x{j}" for j in range(4)])


def synth_relevance(
    n: int, d: int = 8, relevant: Sequence[int] = (0, 1), noise_sd: float = 0.1, seed: int = 0
) -> Dataset:
    """Only the ``relevant`` columns of x ~ N(0, I_d) enter y = sum_j sin(1.5 x_j)."""
    if n < 1:
        raise ConfigError("n must be >= 1")
    if not all(0 <= j < d for j in relevant):
        raise ConfigError("relevant indices out of range")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, d))
    y = np.sin(1.5 * x[:, list(relevant)]).sum(axis=1) + noise_sd * rng.standard_normal(n)
    return _raw(x, y, [f"x{j}" for j in range(d)])


SYNTHETIC = {
    "sin1d": synth_sin_1d,
    "sin2d": synth_sin_2d,
    "surf4d": synth_4d,
    "ard8": synth_relevance,
}
