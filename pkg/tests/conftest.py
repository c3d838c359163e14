import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, str(Path(__file__).parent))

from svgp import core, kernels  # noqa: E402

settings.register_profile(
    "default", deadline=None, suppress_health_check=[HealthCheck.too_slow], max_examples=40
)
settings.load_profile("default")


def random_spec(rng, d, bias=True, jitter=1e-6):
    """RBF-ARD (+ constant) kernel with random log-hyperparameters."""
    spec = kernels.build_spec(d, jitter=jitter, bias_variance=0.5 if bias else None)
    return spec.with_params(rng.uniform(-0.7, 0.7, size=spec.n_params))


def random_instance(seed, n=6, m=3, d=1, random_q=True, jitter=1e-6):
    """A small SVGP model with random hyperparameters, Z, data and (optionally) q."""
    rng = np.random.default_rng(seed)
    spec = random_spec(rng, d, jitter=jitter)
    X = rng.uniform(-2, 2, size=(n, d))
    y = np.sin(2 * X).sum(axis=1) + 0.3 * rng.standard_normal(n)
    Z = rng.uniform(-2, 2, size=(m, d))
    model = core.init_model(spec, rng.uniform(-0.5, 1.5), Z, n)
    if random_q:
        M = rng.standard_normal((m, m))
        S = M @ M.T / m + 0.3 * np.eye(m)
        model = core.SvgpModel(
            spec, model.log_beta, Z, core.VariationalGaussian.from_cov(rng.standard_normal(m), S), n
        )
    return model, X, y


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# -- acceptance summary ------------------------------------------------------

ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, msg = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {msg}")
