"""Covariance functions with log-parameterized hyperparameters.

A :class:`KernelSpec` is an ordered sum of terms. Every hyperparameter is
stored as a logarithm, and the flat "hyper vector" used by the optimizers is
the concatenation, in term order, of each term's log-parameters followed by
the log noise precision ``log_beta``::

    RbfArd   -> [log_variance, log_lengthscale_0, ..., log_lengthscale_{d-1}]
    Constant -> [log_variance]
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence, Union

import numpy as np

from .errors import ConfigError

DEFAULT_JITTER = 1e-6


@dataclass(frozen=True, eq=False)
class RbfArd:
    """Squared exponential with one lengthscale per input dimension."""

    log_variance: float
    log_lengthscales: np.ndarray

    kind = "rbf_ard"

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.log_lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size == 0:
            raise ConfigError("log_lengthscales must be a non-empty vector")
        object.__setattr__(self, "log_lengthscales", ls)
        object.__setattr__(self, "log_variance", float(self.log_variance))

    @property
    def input_dim(self) -> int:
        return self.log_lengthscales.size

    @property
    def variance(self) -> float:
        return float(np.exp(self.log_variance))

    @property
    def lengthscales(self) -> np.ndarray:
        return np.exp(self.log_lengthscales)

    @property
    def n_params(self) -> int:
        return 1 + self.input_dim

    def params(self) -> np.ndarray:
        return np.concatenate([[self.log_variance], self.log_lengthscales])

    def with_params(self, p) -> "RbfArd":
        return RbfArd(p[0], np.array(p[1:], dtype=float))

    def param_names(self, prefix: str) -> list[str]:
        return [f"{prefix}log_variance"] + [
            f"{prefix}log_lengthscale[{j}]" for j in range(self.input_dim)
        ]

    def _scaled_sq(self, A, B):
        # One d-loop per entry in fixed order: no |a|^2 - 2ab + |b|^2 shortcut.
        ls = self.lengthscales
        per_dim = []
        for j in range(self.input_dim):
            diff = (A[:, j, None] - B[None, :, j]) / ls[j]
            per_dim.append(diff * diff)
        return per_dim

    def matrix(self, A, B):
        r2 = np.zeros((A.shape[0], B.shape[0]))
        for sq in self._scaled_sq(A, B):
            r2 += sq
        return self.variance * np.exp(-0.5 * r2)

    def diag(self, A):
        return np.full(A.shape[0], self.variance)

    def grads(self, A, B):
        per_dim = self._scaled_sq(A, B)
        r2 = np.zeros((A.shape[0], B.shape[0]))
        for sq in per_dim:
            r2 += sq
        K = self.variance * np.exp(-0.5 * r2)
        return [K] + [K * sq for sq in per_dim]

    def grad_diag(self, A):
        n = A.shape[0]
        return [np.full(n, self.variance)] + [np.zeros(n)] * self.input_dim

    def grad_inputs(self, A, B, G):
        """Row i holds sum_b G[i, b] * d k(a_i, b) / d a_i."""
        W = G * self.matrix(A, B)
        row = W.sum(axis=1)
        ls2 = self.lengthscales**2
        return -(A * row[:, None] - W @ B) / ls2


@dataclass(frozen=True, eq=False)
class Constant:
    """Bias term: the same covariance between every pair of points."""

    log_variance: float

    kind = "constant"
    n_params = 1
    input_dim = None

    def __post_init__(self):
        object.__setattr__(self, "log_variance", float(self.log_variance))

    @property
    def variance(self) -> float:
        return float(np.exp(self.log_variance))

    def params(self) -> np.ndarray:
        return np.array([self.log_variance])

    def with_params(self, p) -> "Constant":
        return Constant(p[0])

    def param_names(self, prefix: str) -> list[str]:
        return [f"{prefix}log_variance"]

    def matrix(self, A, B):
        return np.full((A.shape[0], B.shape[0]), self.variance)

    def diag(self, A):
        return np.full(A.shape[0], self.variance)

    def grads(self, A, B):
        return [self.matrix(A, B)]

    def grad_diag(self, A):
        return [self.diag(A)]

    def grad_inputs(self, A, B, G):
        return np.zeros_like(A, dtype=float)


KernelTerm = Union[RbfArd, Constant]


@dataclass(frozen=True, eq=False)
class KernelSpec:
    terms: tuple
    jitter: float = 0.0
    input_dim: int = field(init=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        if not terms:
            raise ConfigError("a kernel needs at least one term")
        if not self.jitter >= 0:
            raise ConfigError(f"jitter must be >= 0, got {self.jitter}")
        dims = {t.input_dim for t in terms if t.input_dim is not None}
        if len(dims) > 1:
            raise ConfigError(f"terms disagree on input dimension: {sorted(dims)}")
        object.__setattr__(self, "terms", terms)
        object.__setattr__(self, "jitter", float(self.jitter))
        object.__setattr__(self, "input_dim", dims.pop() if dims else None)

    @property
    def n_params(self) -> int:
        return sum(t.n_params for t in self.terms)

    def params(self) -> np.ndarray:
        return np.concatenate([t.params() for t in self.terms])

    def with_params(self, p) -> "KernelSpec":
        p = np.asarray(p, dtype=float)
        if p.size != self.n_params:
            raise ConfigError(f"expected {self.n_params} kernel parameters, got {p.size}")
        terms, i = [], 0
        for t in self.terms:
            terms.append(t.with_params(p[i : i + t.n_params]))
            i += t.n_params
        return replace(self, terms=tuple(terms))

    def param_names(self) -> list[str]:
        names = []
        for k, t in enumerate(self.terms):
            names += t.param_names(f"{k}:{t.kind}.")
        return names

    def prior_variance(self) -> float:
        return sum(t.variance for t in self.terms)


def build_spec(
    input_dim: int,
    lengthscales: Sequence[float] = (1.0,),
    variance: float = 1.0,
    bias_variance: float | None = 1.0,
    jitter: float = DEFAULT_JITTER,
) -> KernelSpec:
    """One ARD squared-exponential term per entry of ``lengthscales`` plus a bias.

    Every ARD term starts with all its lengthscales equal to the given value.
    ``jitter`` is relative: the stored absolute jitter is ``jitter`` times the
    prior variance (the mean diagonal of a stationary kernel) at construction.
    """
    if input_dim < 1:
        raise ConfigError("input_dim must be >= 1")
    terms: list[KernelTerm] = [
        RbfArd(np.log(variance), np.full(input_dim, np.log(ls))) for ls in lengthscales
    ]
    if bias_variance is not None:
        terms.append(Constant(np.log(bias_variance)))
    spec = KernelSpec(tuple(terms))
    return replace(spec, jitter=jitter * spec.prior_variance())


def _check(spec: KernelSpec, *arrays):
    out = []
    for A in arrays:
        A = np.asarray(A, dtype=float)
        if A.ndim == 1:
            A = A[:, None]
        if A.ndim != 2:
            raise ConfigError(f"point sets must be 2-D, got shape {A.shape}")
        if spec.input_dim is not None and A.shape[1] != spec.input_dim:
            raise ConfigError(
                f"point set has {A.shape[1]} columns but the kernel expects {spec.input_dim}"
            )
        out.append(A)
    if len(out) == 2 and out[0].shape[1] != out[1].shape[1]:
        raise ConfigError("point sets disagree on dimension")
    return out


def eval_matrix(spec: KernelSpec, A, B=None, *, add_jitter: bool | None = None) -> np.ndarray:
    """Covariance between the rows of ``A`` and ``B``.

    With ``B`` omitted the self-covariance of ``A`` is returned, with the
    jitter added to its diagonal (override with ``add_jitter``).
    """
    same = B is None
    if add_jitter is None:
        add_jitter = same
    (A,) = _check(spec, A)
    (B,) = (A,) if same else _check(spec, B)
    if A.shape[1] != B.shape[1]:
        raise ConfigError("point sets disagree on dimension")
    K = np.zeros((A.shape[0], B.shape[0]))
    for t in spec.terms:
        K += t.matrix(A, B)
    if add_jitter and spec.jitter > 0:
        if K.shape[0] != K.shape[1]:
            raise ConfigError("jitter only applies to square self-covariances")
        K[np.diag_indices_from(K)] += spec.jitter
    return K


def eval_diag(spec: KernelSpec, A) -> np.ndarray:
    """k(a_i, a_i) for every row, without jitter."""
    (A,) = _check(spec, A)
    out = np.zeros(A.shape[0])
    for t in spec.terms:
        out += t.diag(A)
    return out


def grad_matrix(spec: KernelSpec, A, B=None) -> list[np.ndarray]:
    """dK(A, B)/d(log-parameter), one matrix per kernel parameter.

    Ordering matches :meth:`KernelSpec.params`. The jitter is a constant and
    contributes nothing.
    """
    (A,) = _check(spec, A)
    (B,) = (A,) if B is None else _check(spec, B)
    out = []
    for t in spec.terms:
        out += t.grads(A, B)
    return out


def grad_diag(spec: KernelSpec, A) -> list[np.ndarray]:
    (A,) = _check(spec, A)
    out = []
    for t in spec.terms:
        out += t.grad_diag(A)
    return out


def grad_inputs(spec: KernelSpec, A, B, G) -> np.ndarray:
    """Gradient of ``sum(G * K(A, B))`` with respect to the rows of ``A`` (B held fixed)."""
    A, B = _check(spec, A, B)
    out = np.zeros_like(A)
    for t in spec.terms:
        out += t.grad_inputs(A, B, G)
    return out


def pack(spec: KernelSpec, log_beta: float) -> np.ndarray:
    """Flat hyper vector: kernel log-parameters then ``log_beta``."""
    return np.concatenate([spec.params(), [float(log_beta)]])


def unpack(spec: KernelSpec, vec) -> tuple[KernelSpec, float]:
    vec = np.asarray(vec, dtype=float)
    if vec.size != spec.n_params + 1:
        raise ConfigError(f"hyper vector must have {spec.n_params + 1} entries, got {vec.size}")
    return spec.with_params(vec[:-1]), float(vec[-1])


def hyper_names(spec: KernelSpec) -> list[str]:
    return spec.param_names() + ["log_beta"]


def to_dict(spec: KernelSpec) -> dict:
    terms = []
    for t in spec.terms:
        if isinstance(t, RbfArd):
            terms.append(
                {
                    "kind": t.kind,
                    "log_variance": t.log_variance,
                    "log_lengthscales": t.log_lengthscales.tolist(),
                }
            )
        else:
            terms.append({"kind": t.kind, "log_variance": t.log_variance})
    return {"terms": terms, "jitter": spec.jitter, "input_dim": spec.input_dim}


def from_dict(d: dict) -> KernelSpec:
    terms: list[KernelTerm] = []
    for t in d["terms"]:
        if t["kind"] == RbfArd.kind:
            terms.append(RbfArd(t["log_variance"], np.array(t["log_lengthscales"], dtype=float)))
        elif t["kind"] == Constant.kind:
            terms.append(Constant(t["log_variance"]))
        else:
            raise ConfigError(f"unknown kernel term {t['kind']!r}")
    spec = KernelSpec(tuple(terms), jitter=d.get("jitter", 0.0))
    if d.get("input_dim") is not None and spec.input_dim not in (None, d["input_dim"]):
        raise ConfigError("stored input_dim disagrees with lengthscale vectors")
    return spec
