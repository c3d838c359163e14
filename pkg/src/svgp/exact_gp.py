"""Dense GP regression: exact marginal likelihood, prediction and type-II ML.

Cost is cubic in the number of points, so this module is used for subset
baselines and as the reference the sparse bounds are checked against.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from . import kernels
from .errors import ConfigError, NumericalError, OptimizationError
from .kernels import KernelSpec

log = logging.getLogger(__name__)

LOG_2PI = np.log(2.0 * np.pi)
DENSE_CAP = 5000


def _cholesky(K: np.ndarray, what: str) -> np.ndarray:
    try:
        return linalg.cholesky(K, lower=True)
    except linalg.LinAlgError as exc:
        d = np.diag(K)
        raise NumericalError(
            f"Cholesky of {what} failed (n={K.shape[0]}, diag range "
            f"[{d.min():.3g}, {d.max():.3g}], cond estimate {np.linalg.cond(K):.3g})"
        ) from exc


@dataclass(frozen=True, eq=False)
class ExactGp:
    spec: KernelSpec
    log_beta: float
    X: np.ndarray
    y: np.ndarray
    factor: np.ndarray = field(repr=False)
    alpha: np.ndarray = field(repr=False)
    n_clamped: int = 0

    @property
    def beta(self) -> float:
        return float(np.exp(self.log_beta))

    @property
    def n(self) -> int:
        return self.X.shape[0]


def make_exact(spec: KernelSpec, log_beta: float, X, y, cap: int = DENSE_CAP) -> ExactGp:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if X.shape[0] < 1:
        raise ConfigError("exact GP needs at least one point")
    if X.shape[0] != y.size:
        raise ConfigError(f"X has {X.shape[0]} rows but y has {y.size} entries")
    if X.shape[0] > cap:
        raise ConfigError(f"n={X.shape[0]} exceeds the dense cap {cap}; raise `cap` explicitly")
    # Noise is part of the covariance here, so no jitter is added.
    Ky = kernels.eval_matrix(spec, X, X)
    Ky[np.diag_indices_from(Ky)] += np.exp(-log_beta)
    L = _cholesky(Ky, "K_nn + I/beta")
    alpha = linalg.cho_solve((L, True), y)
    return ExactGp(spec, float(log_beta), X, y, L, alpha)


def log_marginal(gp: ExactGp) -> float:
    """log N(y | 0, K_nn + I/beta)."""
    return float(
        -0.5 * gp.y @ gp.alpha - np.log(np.diag(gp.factor)).sum() - 0.5 * gp.n * LOG_2PI
    )


def log_marginal_grad(gp: ExactGp) -> np.ndarray:
    """Gradient of :func:`log_marginal` in hyper-vector order (kernel params, log_beta)."""
    Kinv = linalg.cho_solve((gp.factor, True), np.eye(gp.n))
    W = np.outer(gp.alpha, gp.alpha) - Kinv
    grads = [0.5 * np.sum(W * dK) for dK in kernels.grad_matrix(gp.spec, gp.X)]
    # d(K + I/beta)/dlog_beta = -I/beta
    grads.append(-0.5 * np.trace(W) / gp.beta)
    return np.array(grads)


def predict_exact(gp: ExactGp, Xstar) -> tuple[np.ndarray, np.ndarray]:
    """Latent predictive mean and variance at ``Xstar``.

    Negative variances from round-off are clamped to zero; the count is logged.
    """
    Ksn = kernels.eval_matrix(gp.spec, Xstar, gp.X)
    mean = Ksn @ gp.alpha
    V = linalg.solve_triangular(gp.factor, Ksn.T, lower=True)
    var = kernels.eval_diag(gp.spec, Xstar) - np.sum(V * V, axis=0)
    neg = var < 0
    if neg.any():
        log.debug("clamped %d negative exact predictive variances", int(neg.sum()))
        var = np.where(neg, 0.0, var)
    return mean, var


@dataclass
class Ml2Settings:
    method: str = "lbfgs"  # or "gradient"
    max_iters: int = 200
    grad_tol: float = 1e-3
    step: float = 0.1
    min_step: float = 1e-10
    cap: int = DENSE_CAP


@dataclass
class Ml2Result:
    gp: ExactGp
    iterations: int
    converged: bool
    grad_norm: float
    history: list = field(default_factory=list)  # hyper vectors, one per accepted iterate


def fit_ml2(spec: KernelSpec, log_beta: float, X, y, settings: Ml2Settings | None = None) -> Ml2Result:
    """Type-II maximum likelihood over all log-hyperparameters.

    ``method="lbfgs"`` uses scipy's L-BFGS-B on the negated objective;
    ``method="gradient"`` is plain gradient ascent along the normalized
    gradient, halving the step until the objective does not decrease and
    growing it by 1.5 after each accepted step.
    """
    s = settings or Ml2Settings()
    theta0 = kernels.pack(spec, log_beta)

    def build(th):
        sp, lb = kernels.unpack(spec, th)
        try:
            gp = make_exact(sp, lb, X, y, cap=s.cap)
        except NumericalError:
            return None, -np.inf
        return gp, log_marginal(gp)

    gp, obj = build(theta0)
    if gp is None or not np.isfinite(obj):
        raise OptimizationError("initial hyperparameters give a non-finite marginal likelihood")
    g = log_marginal_grad(gp)
    if s.max_iters == 0:
        return Ml2Result(gp, 0, False, float(np.linalg.norm(g)), [theta0])
    if s.method == "lbfgs":
        return _fit_lbfgs(build, theta0, gp, s)
    if s.method != "gradient":
        raise ConfigError(f"unknown type-II ML method {s.method!r}")

    theta = theta0
    history = [theta0]
    step = s.step
    gnorm = float(np.linalg.norm(g))
    it = 0
    while it < s.max_iters and gnorm > s.grad_tol:
        it += 1
        direction = g / gnorm
        while True:
            cand = theta + step * direction
            cgp, cobj = build(cand)
            if cgp is not None and cobj >= obj:
                break
            step *= 0.5
            if step < s.min_step:
                break
        if step < s.min_step:
            log.debug("fit_ml2: step underflow at iteration %d", it)
            break
        if not np.all(np.isfinite(cand)):
            raise OptimizationError("non-finite hyperparameters", state=gp)
        theta, gp, obj = cand, cgp, cobj
        history.append(theta)
        g = log_marginal_grad(gp)
        if not np.all(np.isfinite(g)):
            raise OptimizationError("non-finite gradient", state=gp)
        gnorm = float(np.linalg.norm(g))
        step *= 1.5
    return Ml2Result(gp, it, gnorm <= s.grad_tol, gnorm, history)


def _fit_lbfgs(build, theta0, gp0, s: Ml2Settings) -> Ml2Result:
    best = {"gp": gp0, "obj": log_marginal(gp0)}
    history = [theta0]

    def fun(th):
        gp, obj = build(th)
        if gp is None or not np.isfinite(obj):
            return np.inf, np.zeros_like(th)
        if obj > best["obj"]:
            best["gp"], best["obj"] = gp, obj
        return -obj, -log_marginal_grad(gp)

    res = optimize.minimize(
        fun,
        theta0,
        jac=True,
        method="L-BFGS-B",
        callback=lambda th: history.append(np.array(th)),
        options={"maxiter": s.max_iters, "gtol": s.grad_tol},
    )
    gp, obj = build(res.x)
    if gp is None or not np.isfinite(obj):
        raise OptimizationError("L-BFGS ended at a non-finite objective", state=best["gp"])
    gnorm = float(np.linalg.norm(log_marginal_grad(gp)))
    return Ml2Result(gp, int(res.nit), bool(res.success), gnorm, history)
