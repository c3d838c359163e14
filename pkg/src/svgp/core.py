"""Sparse variational GP: bounds, optimal q(u), natural-gradient steps and gradients.

Notation follows the usual inducing-point conventions: ``Z`` are the m
inducing inputs, ``Kmm`` their (jittered) covariance with Cholesky factor
``L``, ``Knm`` the cross-covariance to a batch of inputs, and
``q(u) = N(mean, S)`` the variational distribution over inducing values.

Every application of ``Kmm^{-1}`` goes through triangular solves with ``L``.
Where numerically sensitive, quantities are formed in the whitened basis
``u = L v``; ``R = L^{-1} chol(S)`` is the whitened square root of ``S``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import linalg

from . import kernels
from .errors import ConfigError, NumericalError
from .kernels import KernelSpec

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
KTILDE_TOL = 1e-8


def _chol(M: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.cholesky(M, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(f"Cholesky of {what} failed (size {M.shape[0]})") from exc


def _sym(M):
    return 0.5 * (M + M.T)


def _tri(L, B, trans=False):
    return linalg.solve_triangular(L, B, lower=True, trans="T" if trans else "N")


def _chol_of_inverse(Lp: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor of (Lp Lp^T)^{-1}, without forming the inverse."""
    Linv = linalg.solve_triangular(Lp, np.eye(Lp.shape[0]), lower=True)
    # (Lp Lp^T)^{-1} = Linv^T Linv = Rq^T Rq for Linv = Q Rq
    Rq = linalg.qr(Linv, mode="r")[0]
    out = Rq.T
    return out * np.sign(np.diag(out))[None, :]


@dataclass(frozen=True, eq=False)
class VariationalGaussian:
    """q(u) = N(mean, S), with S held through its lower Cholesky factor."""

    mean: np.ndarray
    chol: np.ndarray

    @classmethod
    def from_cov(cls, mean, S) -> "VariationalGaussian":
        return cls(np.asarray(mean, dtype=float), _chol(_sym(np.asarray(S, float)), "S"))

    @classmethod
    def from_natural(cls, theta1, theta2) -> "VariationalGaussian":
        """Rebuild (mean, S) from theta1 = S^{-1} mean and theta2 = -S^{-1}/2."""
        Lp = _chol(_sym(-2.0 * np.asarray(theta2, float)), "precision -2*theta2")
        mean = linalg.cho_solve((Lp, True), np.asarray(theta1, float))
        return cls(mean, _chol_of_inverse(Lp))

    @classmethod
    def prior(cls, Kmm_chol) -> "VariationalGaussian":
        return cls(np.zeros(Kmm_chol.shape[0]), np.array(Kmm_chol, dtype=float))

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def cov(self) -> np.ndarray:
        return self.chol @ self.chol.T

    @property
    def precision(self) -> np.ndarray:
        return _sym(linalg.cho_solve((self.chol, True), np.eye(self.dim)))

    @property
    def theta1(self) -> np.ndarray:
        return linalg.cho_solve((self.chol, True), self.mean)

    @property
    def theta2(self) -> np.ndarray:
        return -0.5 * self.precision

    @property
    def eta1(self) -> np.ndarray:
        return self.mean

    @property
    def eta2(self) -> np.ndarray:
        return np.outer(self.mean, self.mean) + self.cov


@dataclass(frozen=True, eq=False)
class SvgpModel:
    spec: KernelSpec
    log_beta: float
    Z: np.ndarray
    q: VariationalGaussian
    n_total: int

    def __post_init__(self):
        Z = np.asarray(self.Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        object.__setattr__(self, "Z", Z)
        object.__setattr__(self, "log_beta", float(self.log_beta))
        if Z.shape[0] != self.q.dim:
            raise ConfigError(f"Z has {Z.shape[0]} rows but q(u) has dimension {self.q.dim}")
        if self.n_total < 1:
            raise ConfigError("n_total must be >= 1")
        if self.spec.input_dim is not None and Z.shape[1] != self.spec.input_dim:
            raise ConfigError("Z columns do not match the kernel input dimension")

    @property
    def beta(self) -> float:
        return float(np.exp(self.log_beta))

    @property
    def num_inducing(self) -> int:
        return self.Z.shape[0]

    def hypers(self) -> np.ndarray:
        return kernels.pack(self.spec, self.log_beta)

    def with_hypers(self, vec) -> "SvgpModel":
        spec, log_beta = kernels.unpack(self.spec, vec)
        return replace(self, spec=spec, log_beta=log_beta)

    def Kmm_chol(self) -> np.ndarray:
        return kmm_cholesky(self.spec, self.Z)


def kmm_cholesky(spec: KernelSpec, Z) -> np.ndarray:
    Kmm = kernels.eval_matrix(spec, Z)
    try:
        return linalg.cholesky(Kmm, lower=True)
    except linalg.LinAlgError as exc:
        Z = np.asarray(Z, float).reshape(Kmm.shape[0], -1)
        _, counts = np.unique(Z, axis=0, return_counts=True)
        dup = int((counts > 1).sum())
        raise NumericalError(
            f"Cholesky of K_mm failed (m={Kmm.shape[0]}, jitter={spec.jitter:.3g}, "
            f"{dup} duplicated inducing inputs); increase the jitter or de-duplicate Z"
        ) from exc


def init_model(spec: KernelSpec, log_beta: float, Z, n_total: int) -> SvgpModel:
    """Model with q(u) equal to the prior p(u) = N(0, Kmm)."""
    return SvgpModel(spec, log_beta, Z, VariationalGaussian.prior(kmm_cholesky(spec, Z)), n_total)


@dataclass(frozen=True, eq=False)
class BatchStats:
    Kmm_chol: np.ndarray
    Knm: np.ndarray
    ktilde_diag: np.ndarray
    y_batch: np.ndarray
    scale: float
    X_batch: np.ndarray = field(repr=False)
    A: np.ndarray = field(repr=False)  # L^{-1} K_mn
    n_clamped: int = 0

    @property
    def size(self) -> int:
        return self.y_batch.size


def batch_stats(model: SvgpModel, X_batch, y_batch, Kmm_chol=None) -> BatchStats:
    """Minibatch quantities; pass ``Kmm_chol`` to reuse an existing factor of the model's Kmm."""
    X = np.asarray(X_batch, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y_batch, dtype=float).ravel()
    if X.shape[0] == 0:
        raise ConfigError("empty batch")
    if X.shape[0] != y.size:
        raise ConfigError(f"batch has {X.shape[0]} inputs but {y.size} targets")
    if X.shape[1] != model.Z.shape[1]:
        raise ConfigError("batch inputs and Z disagree on dimension")
    L = model.Kmm_chol() if Kmm_chol is None else Kmm_chol
    Knm = kernels.eval_matrix(model.spec, X, model.Z)
    A = _tri(L, Knm.T)
    kt = kernels.eval_diag(model.spec, X) - np.sum(A * A, axis=0)
    bad = kt < -KTILDE_TOL
    n_bad = int(bad.sum())
    if n_bad:
        log.debug("clamped %d negative ktilde entries", n_bad)
        kt = np.where(bad, 0.0, kt)
    return BatchStats(L, Knm, kt, y, model.n_total / y.size, X, A, n_bad)


def _collapsed_pieces(model: SvgpModel, X, y):
    st = batch_stats(model, X, y)
    beta = model.beta
    B = np.eye(model.num_inducing) + beta * st.A @ st.A.T
    LB = _chol(B, "I + beta A A^T")
    c = beta * _tri(LB, st.A @ st.y_batch)
    return st, LB, c


def bound_L2(model: SvgpModel, X, y) -> float:
    """Collapsed bound: log N(y | 0, Qnn + I/beta) - beta/2 tr(Knn - Qnn), in O(n m^2)."""
    st, LB, c = _collapsed_pieces(model, X, y)
    n, beta = st.size, model.beta
    y = st.y_batch
    lik = (
        -0.5 * n * LOG_2PI
        + 0.5 * n * model.log_beta
        - np.log(np.diag(LB)).sum()
        - 0.5 * (beta * y @ y - c @ c)
    )
    return float(lik - 0.5 * beta * st.ktilde_diag.sum())


def optimal_q(model: SvgpModel, X, y) -> VariationalGaussian:
    """The q(u) that makes the uncollapsed bound equal to the collapsed one.

    Precision Kmm^{-1} + beta Kmm^{-1} Kmn Knm Kmm^{-1}; mean beta S Kmm^{-1} Kmn y.
    """
    st, LB, c = _collapsed_pieces(model, X, y)
    L = st.Kmm_chol
    # S = L B^{-1} L^T, mean = L B^{-1} (beta A y)
    v = _tri(LB, c, trans=True)
    return VariationalGaussian(L @ v, L @ _chol_of_inverse(LB))


def kl_qp(q: VariationalGaussian, Kmm_chol) -> float:
    """KL(N(mean, S) || N(0, Kmm))."""
    L = Kmm_chol
    if q.dim != L.shape[0]:
        raise ConfigError("q(u) and Kmm disagree on dimension")
    d = np.diag(q.chol)
    if not np.all(d > 0) or not np.all(np.isfinite(q.chol)):
        raise NumericalError("S is not positive definite")
    R = _tri(L, q.chol)
    w = _tri(L, q.mean)
    kl = 0.5 * (
        np.sum(R * R) + w @ w - q.dim + 2.0 * np.log(np.diag(L)).sum() - 2.0 * np.log(d).sum()
    )
    return float(kl)


def _data_terms(model: SvgpModel, st: BatchStats):
    """Residuals and quadratic pieces of the per-point expected log-likelihood."""
    L = st.Kmm_chol
    alpha = _tri(L, _tri(L, model.q.mean), trans=True)  # Kmm^{-1} mean
    r = st.y_batch - st.Knm @ alpha
    R = _tri(L, model.q.chol)
    W = R.T @ st.A  # column i: chol(S)^T Kmm^{-1} k_i
    return alpha, r, R, W


def bound_L3(model: SvgpModel, stats: BatchStats) -> float:
    """Uncollapsed bound on a batch; the data sum is scaled by ``stats.scale``, the KL is not."""
    st = stats
    _, r, _, W = _data_terms(model, st)
    beta = model.beta
    b = st.size
    data = (
        -0.5 * b * LOG_2PI
        + 0.5 * b * model.log_beta
        - 0.5 * beta * (r @ r + st.ktilde_diag.sum() + np.sum(W * W))
    )
    return float(st.scale * data - kl_qp(model.q, st.Kmm_chol))


def natural_targets(model: SvgpModel, stats: BatchStats):
    """Batch estimates of (Lambda, beta Kmm^{-1} Kmn y) that a unit natural step jumps to.

    Lambda = Kmm^{-1} + scale * beta Kmm^{-1} K_mB K_Bm Kmm^{-1}; only the data
    part is scaled.
    """
    L = stats.Kmm_chol
    PK = _tri(L, stats.A, trans=True)
    P = linalg.cho_solve((L, True), np.eye(L.shape[0]))
    s = stats.scale * model.beta
    return _sym(P + s * PK @ PK.T), s * PK @ stats.y_batch


def nat_grad_step(model: SvgpModel, stats: BatchStats, step: float) -> VariationalGaussian:
    """One natural-gradient step of length ``step`` on q(u).

    In natural parameters this is the convex combination
    ``theta <- (1 - step) * theta + step * theta_target``. It is evaluated in the
    Kmm-whitened basis, where the precision is well conditioned.
    """
    if not 0.0 < step <= 1.0:
        raise ConfigError(f"natural-gradient step must lie in (0, 1], got {step}")
    st = stats
    L = st.Kmm_chol
    m = st.A.shape[0]
    s = st.scale * model.beta
    R = _tri(L, model.q.chol)
    v = _tri(L, model.q.mean)
    # whitened current precision (R R^T)^{-1} and natural mean
    Rinv = _tri(R, np.eye(m))
    prec_cur = Rinv.T @ Rinv
    theta1_cur = Rinv.T @ (Rinv @ v)
    prec_tgt = np.eye(m) + s * st.A @ st.A.T
    theta1_tgt = s * st.A @ st.y_batch
    prec = _sym((1.0 - step) * prec_cur + step * prec_tgt)
    theta1 = (1.0 - step) * theta1_cur + step * theta1_tgt
    try:
        Lp = linalg.cholesky(prec, lower=True)
    except linalg.LinAlgError as exc:
        raise NumericalError(
            "updated precision is not positive definite; this should not happen for step <= 1"
        ) from exc
    v_new = linalg.cho_solve((Lp, True), theta1)
    return VariationalGaussian(L @ v_new, L @ _chol_of_inverse(Lp))


def _sensitivities(model: SvgpModel, st: BatchStats):
    """dL3/dKnm, dL3/dKmm, dL3/dk_ii and dL3/dlog_beta with q(u) held fixed."""
    L = st.Kmm_chol
    m = L.shape[0]
    beta, scale = model.beta, st.scale
    alpha, r, R, W = _data_terms(model, st)
    P = linalg.cho_solve((L, True), np.eye(m))
    PK = _tri(L, st.A, trans=True)  # Kmm^{-1} K_mB
    V = _tri(L, R, trans=True)  # Kmm^{-1} chol(S)
    PSP = V @ V.T
    SP = model.q.cov @ P
    T = PK @ PK.T  # Kmm^{-1} K_mB K_Bm Kmm^{-1}

    G_nm = scale * beta * (np.outer(r, alpha) + PK.T - PK.T @ SP)
    G_mm = scale * (
        -beta * np.outer(PK @ r, alpha) + 0.5 * beta * (-T + T @ SP + SP.T @ T)
    ) + 0.5 * (PSP + np.outer(alpha, alpha) - P)
    g_diag = np.full(st.size, -0.5 * scale * beta)
    quad = r @ r + st.ktilde_diag.sum() + np.sum(W * W)
    d_log_beta = scale * (0.5 * st.size - 0.5 * beta * quad)
    return G_nm, G_mm, g_diag, d_log_beta


def hyper_grads(model: SvgpModel, stats: BatchStats) -> np.ndarray:
    """Gradient of :func:`bound_L3` in hyper-vector order (kernel log-params, log_beta)."""
    G_nm, G_mm, g_diag, d_log_beta = _sensitivities(model, stats)
    dKnm = kernels.grad_matrix(model.spec, stats.X_batch, model.Z)
    dKmm = kernels.grad_matrix(model.spec, model.Z)
    dkd = kernels.grad_diag(model.spec, stats.X_batch)
    g = [
        np.sum(G_nm * a) + np.sum(G_mm * b) + g_diag @ c for a, b, c in zip(dKnm, dKmm, dkd)
    ]
    g.append(d_log_beta)
    return np.array(g)


def grad_Z(model: SvgpModel, stats: BatchStats) -> np.ndarray:
    """Gradient of :func:`bound_L3` with respect to the inducing inputs, q(u) fixed."""
    G_nm, G_mm, _, _ = _sensitivities(model, stats)
    return kernels.grad_inputs(model.spec, model.Z, stats.X_batch, G_nm.T) + kernels.grad_inputs(
        model.spec, model.Z, model.Z, G_mm + G_mm.T
    )


def predict_svgp(model: SvgpModel, Xstar, observed: bool = False):
    """Predictive mean and variance; ``observed`` adds the noise variance 1/beta."""
    Xs = np.asarray(Xstar, dtype=float)
    if Xs.ndim == 1:
        Xs = Xs[:, None]
    if Xs.shape[1] != model.Z.shape[1]:
        raise ConfigError(f"inputs have {Xs.shape[1]} columns, model expects {model.Z.shape[1]}")
    L = model.Kmm_chol()
    Ksm = kernels.eval_matrix(model.spec, Xs, model.Z)
    As = _tri(L, Ksm.T)
    R = _tri(L, model.q.chol)
    mean = As.T @ _tri(L, model.q.mean)
    Ws = R.T @ As
    var = kernels.eval_diag(model.spec, Xs) - np.sum(As * As, axis=0) + np.sum(Ws * Ws, axis=0)
    neg = var < 0
    if neg.any():
        log.debug("clamped %d negative predictive variances", int(neg.sum()))
        var = np.where(neg, 0.0, var)
    if observed:
        var = var + 1.0 / model.beta
    return mean, var
