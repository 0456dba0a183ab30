"""Reference parameter sets."""

import numpy as np

from .affine import ModelParams2D


def default_params(rho_z: float = 0.0, **overrides) -> ModelParams2D:
    """Annual two-state economy with mean log pd near 3.85 and mean dr near 3.9.

    Three independent unit shocks: dividend, growth state, risk-price state.
    """
    kw = dict(
        rho_z=rho_z,
        rho_y=0.9,
        sigma_z=np.array([0.0, 0.02, 0.0]),
        sigma_y=np.array([0.0, 0.0, 0.3]),
        sigma_D=np.array([0.1, 0.0, 0.0]),
        sigma_lambda=np.array([1.0, 0.0, 0.0]),
        Sigma=np.eye(3),
        g_bar=0.06,
        lambda_bar=0.92,
        r_f=0.02,
    )
    kw.update(overrides)
    return ModelParams2D(**kw)
