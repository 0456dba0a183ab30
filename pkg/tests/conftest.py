import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from durlab.affine import ModelParams2D
from durlab.presets import default_params

settings.register_profile("durlab", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("durlab")


@pytest.fixture
def params():
    return default_params()


@pytest.fixture
def params_persistent():
    return default_params(rho_z=0.3, sigma_z=np.array([0.0, 0.05, 0.0]))


def random_params_2d(rng, N=3) -> ModelParams2D:
    """A random admissible two-state economy with moderate loadings."""
    A = rng.standard_normal((N, N))
    Sigma = A @ A.T / N + 0.2 * np.eye(N)
    return ModelParams2D(
        rho_z=rng.uniform(-0.8, 0.8), rho_y=rng.uniform(0.0, 0.95),
        sigma_z=rng.normal(0, 0.03, N), sigma_y=rng.normal(0, 0.2, N),
        sigma_D=rng.normal(0, 0.08, N), sigma_lambda=rng.normal(0, 0.5, N),
        Sigma=Sigma, g_bar=rng.uniform(0.0, 0.06), lambda_bar=rng.uniform(0.0, 1.0),
        r_f=rng.uniform(0.0, 0.04),
    )


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
