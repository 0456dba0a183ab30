import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from durlab import _kernels

numba_impl = _kernels.numba_impl
np_impl = _kernels.numpy_impl
needs_numba = pytest.mark.skipif(numba_impl is None, reason="numba not installed")


@needs_numba
@given(st.integers(0, 10 ** 6), st.floats(-0.99, 0.99), st.floats(-5, 5))
def test_ar1_filter_backends_agree(seed, rho, x0):
    shocks = np.random.default_rng(seed).standard_normal(int(seed % 300) + 1)
    a = numba_impl.ar1_filter(rho, shocks, x0)
    b = np_impl.ar1_filter(rho, shocks, x0)
    assert a.shape == b.shape == (len(shocks) + 1,)
    np.testing.assert_allclose(a, b, rtol=1e-10, atol=1e-10)


@needs_numba
@given(st.integers(0, 10 ** 6))
def test_kalman_backends_agree(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(0.05, 0.1, int(rng.integers(1, 200)))
    args = (0.05, rng.uniform(-0.95, 0.95), rng.uniform(0, 0.2), rng.uniform(0, 0.2), rng.uniform(-0.9, 0.9))
    a, b = numba_impl.kalman_loglik(y, *args), np_impl.kalman_loglik(y, *args)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-12) or (np.isinf(a) and np.isinf(b))


@needs_numba
@given(st.integers(0, 10 ** 6))
def test_ma1_backends_agree(seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(0.05, 0.1, int(rng.integers(1, 200)))
    args = (0.05, rng.uniform(-0.99, 0.99), rng.uniform(0.01, 0.3))
    assert numba_impl.ma1_loglik(y, *args) == pytest.approx(np_impl.ma1_loglik(y, *args), rel=1e-12)


@needs_numba
@given(st.integers(0, 10 ** 6), st.integers(0, 30))
def test_bartlett_backends_agree(seed, lags):
    rng = np.random.default_rng(seed)
    u = rng.standard_normal((int(rng.integers(2, 80)), int(rng.integers(1, 4))))
    np.testing.assert_allclose(numba_impl.bartlett_meat(u, lags), np_impl.bartlett_meat(u, lags),
                               rtol=1e-10, atol=1e-10)


@needs_numba
@given(st.integers(1, 500), st.integers(1, 40), st.integers(0, 10 ** 6))
def test_block_indices_backends_agree(n, block_len, seed):
    starts = np.random.default_rng(seed).integers(0, n, n // block_len + 1)
    a = numba_impl.block_indices(n, block_len, starts)
    b = np_impl.block_indices(n, block_len, starts)
    assert a.shape == (n,) and np.array_equal(a, b)
    assert a.min() >= 0 and a.max() < n


def test_bartlett_lag_zero_is_gram():
    u = np.random.default_rng(0).standard_normal((50, 3))
    np.testing.assert_allclose(_kernels.bartlett_meat(u, 0), u.T @ u, rtol=1e-14)


def test_ar1_filter_recursion():
    x = _kernels.ar1_filter(0.5, [1.0, 0.0, 2.0], 4.0)
    np.testing.assert_allclose(x, [4.0, 3.0, 1.5, 2.75])


def _backend_in_subprocess(env_value):
    env = dict(os.environ)
    env.pop("DURLAB_DISABLE_NUMBA", None)
    if env_value is not None:
        env["DURLAB_DISABLE_NUMBA"] = env_value
    out = subprocess.run([sys.executable, "-c", "from durlab import _kernels; print(_kernels.BACKEND)"],
                         capture_output=True, text=True, env=env, check=True)
    return out.stdout.strip()


def test_env_var_forces_numpy_backend():
    assert _backend_in_subprocess("1") == "numpy"


@needs_numba
def test_default_backend_is_numba():
    assert _backend_in_subprocess(None) == "numba"
