"""Sparse Gaussian-process regression by stochastic variational inference."""

from .core import (
    SvgpModel,
    VariationalGaussian,
    bound_L2,
    bound_L3,
    init_model,
    nat_grad_step,
    optimal_q,
    predict_svgp,
)
from .errors import ConfigError, DataError, NumericalError, SvgpError
from .kernels import KernelSpec, build_spec
from .trainer import TrainConfig, evaluate, train

__all__ = [
    "ConfigError",
    "DataError",
    "KernelSpec",
    "NumericalError",
    "SvgpError",
    "SvgpModel",
    "TrainConfig",
    "VariationalGaussian",
    "bound_L2",
    "bound_L3",
    "build_spec",
    "evaluate",
    "init_model",
    "nat_grad_step",
    "optimal_q",
    "predict_svgp",
    "train",
]
