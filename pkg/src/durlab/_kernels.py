"""Hot loops with a numba path and a plain numpy fallback.

Set ``DURLAB_DISABLE_NUMBA=1`` before import to force the numpy path.  Both
paths are kept importable as ``numba_impl`` / ``numpy_impl`` so tests and the
benchmark can compare them directly.
"""

import math
import os

import numpy as np
from scipy.signal import lfilter

_DISABLED = os.environ.get("DURLAB_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

HAVE_NUMBA = numba is not None
USE_NUMBA = HAVE_NUMBA and not _DISABLED
BACKEND = "numba" if USE_NUMBA else "numpy"

_LOG_2PI = math.log(2.0 * math.pi)


# ---------------------------------------------------------------------------
# loop bodies (compiled by numba, or run as-is where no vector form exists)

def _ar1_filter_loop(rho, shocks, x0):
    n = shocks.shape[0]
    out = np.empty(n + 1)
    out[0] = x0
    for t in range(n):
        out[t + 1] = rho * out[t] + shocks[t]
    return out


def _kalman_loglik_loop(y, g, rho, sd, sz, corr):
    # state x_t = z_{t-1};  y_t = g + x_t + v_t;  x_{t+1} = rho x_t + w_t
    # var(v) = sd^2, var(w) = sz^2, cov(v, w) = corr sd sz
    n = y.shape[0]
    r = sd * sd
    q = sz * sz
    s = corr * sd * sz
    a = 0.0
    p = q / (1.0 - rho * rho)
    ll = 0.0
    for t in range(n):
        f = p + r
        if not (f > 0.0) or not math.isfinite(f):
            return -math.inf
        e = y[t] - g - a
        ll -= 0.5 * (_LOG_2PI + math.log(f) + e * e / f)
        k = (rho * p + s) / f
        a = rho * a + k * e
        p = rho * rho * p + q - k * k * f
        if p < 0.0:
            p = 0.0
    return ll


def _ma1_loglik_loop(y, g, chi, sigma):
    # exact Gaussian likelihood through the innovations algorithm
    n = y.shape[0]
    s2 = sigma * sigma
    g0 = s2 * (1.0 + chi * chi)
    g1 = s2 * chi
    v = g0
    yhat = 0.0
    ll = 0.0
    for t in range(n):
        if not (v > 0.0):
            return -math.inf
        e = y[t] - g - yhat
        ll -= 0.5 * (_LOG_2PI + math.log(v) + e * e / v)
        th = g1 / v
        yhat = th * e
        v = g0 - th * th * v
    return ll


def _bartlett_meat_loop(u, lags):
    n, k = u.shape
    out = np.zeros((k, k))
    for t in range(n):
        for i in range(k):
            for j in range(k):
                out[i, j] += u[t, i] * u[t, j]
    for lag in range(1, lags + 1):
        w = 1.0 - lag / (lags + 1.0)
        for t in range(lag, n):
            for i in range(k):
                for j in range(k):
                    c = w * u[t, i] * u[t - lag, j]
                    out[i, j] += c
                    out[j, i] += c
    return out


def _block_indices_loop(n, block_len, starts):
    out = np.empty(n, dtype=np.int64)
    pos = 0
    for b in range(starts.shape[0]):
        for j in range(block_len):
            if pos >= n:
                return out
            out[pos] = (starts[b] + j) % n
            pos += 1
    return out


# ---------------------------------------------------------------------------
# numpy fallbacks

def _ar1_filter_np(rho, shocks, x0):
    shocks = np.asarray(shocks, dtype=float)
    out = np.empty(shocks.shape[0] + 1)
    out[0] = x0
    out[1:] = lfilter([1.0], [1.0, -rho], shocks, zi=np.array([rho * x0]))[0]
    return out


def _bartlett_meat_np(u, lags):
    out = u.T @ u
    n = u.shape[0]
    for lag in range(1, min(lags, n - 1) + 1):
        w = 1.0 - lag / (lags + 1.0)
        c = u[lag:].T @ u[:-lag]
        out = out + w * (c + c.T)
    return out


def _block_indices_np(n, block_len, starts):
    idx = (np.asarray(starts, dtype=np.int64)[:, None] + np.arange(block_len)) % n
    return idx.ravel()[:n]


class _Impl:
    def __init__(self, **kernels):
        self.__dict__.update(kernels)


numpy_impl = _Impl(
    ar1_filter=_ar1_filter_np,
    kalman_loglik=_kalman_loglik_loop,
    ma1_loglik=_ma1_loglik_loop,
    bartlett_meat=_bartlett_meat_np,
    block_indices=_block_indices_np,
)

if HAVE_NUMBA:
    _jit = numba.njit(cache=True, nogil=True)
    numba_impl = _Impl(
        ar1_filter=_jit(_ar1_filter_loop),
        kalman_loglik=_jit(_kalman_loglik_loop),
        ma1_loglik=_jit(_ma1_loglik_loop),
        bartlett_meat=_jit(_bartlett_meat_loop),
        block_indices=_jit(_block_indices_loop),
    )
else:  # pragma: no cover
    numba_impl = None

_active = numba_impl if USE_NUMBA else numpy_impl


def ar1_filter(rho, shocks, x0=0.0):
    """x[0] = x0, x[t+1] = rho * x[t] + shocks[t]; returns n+1 values."""
    return _active.ar1_filter(float(rho), np.ascontiguousarray(shocks, dtype=float), float(x0))


def kalman_loglik(y, g, rho, sd, sz, corr):
    """Exact Gaussian log-likelihood of the latent-AR(1) growth model."""
    return _active.kalman_loglik(np.ascontiguousarray(y, dtype=float), float(g), float(rho),
                                 float(sd), float(sz), float(corr))


def ma1_loglik(y, g, chi, sigma):
    """Exact Gaussian log-likelihood of y_t = g + sigma (e_t + chi e_{t-1})."""
    return _active.ma1_loglik(np.ascontiguousarray(y, dtype=float), float(g), float(chi), float(sigma))


def bartlett_meat(u, lags):
    """sum_t u_t u_t' plus Bartlett-weighted cross products up to ``lags``."""
    u = np.ascontiguousarray(u, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    # BLAS matmul beats the compiled loop here, so both backends take the numpy route
    return numpy_impl.bartlett_meat(u, int(lags))


def block_indices(n, block_len, starts):
    """Concatenate circular blocks beginning at ``starts``; truncated to n."""
    return _active.block_indices(int(n), int(block_len), np.ascontiguousarray(starts, dtype=np.int64))
