"""Synthetic two-state economies and the market data they imply.

One period is one year by default.  ``frequency="monthly"`` runs the same
economy on a monthly grid: persistence becomes ``rho**(1/12)``, state shock
loadings are rescaled so stationary variances are unchanged, dividend
volatility scales with ``1/sqrt(12)`` and pricing uses the annual closed
forms.  That mode is an approximation used to exercise the monthly pipeline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .affine import (ClosedForm2D, ModelParams2D, solve_2d, solve_pd_bar,
                     solve_strip_coefficients)
from .data import MarketSnapshot, Panel, month_ends, year_ends
from .errors import DataQualityError, ParameterError, ValidationError

RNG_ALGORITHM = "numpy.PCG64"
SUPPORTED_MATURITIES = (0.25, 0.5, 1.0, 1.5, 2.0)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def _psd_sqrt(C: np.ndarray) -> np.ndarray:
    # symmetric square root; tolerates singular covariances
    w, V = np.linalg.eigh(C)
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.T


@dataclass(frozen=True)
class SimPath:
    """Simulated states, prices and returns.

    Arrays indexed by date have length T.  ``r`` and ``dd`` are forward
    looking: ``r[t]`` is the log return from t to t+1 and ``dd[t]`` the log
    dividend growth over the same interval, so both have length T - 1.
    ``div`` is the dividend paid at each date (``D`` annually, ``D / 12`` on
    the monthly grid).
    """

    z: np.ndarray
    y: np.ndarray
    D: np.ndarray
    pd: np.ndarray
    s1: np.ndarray
    s05: np.ndarray
    s1plus: np.ndarray
    dr: np.ndarray
    P: np.ndarray
    P1: np.ndarray
    r: np.ndarray
    dd: np.ndarray
    er: np.ndarray
    div: np.ndarray
    seed: int
    frequency: str
    pd_bar: float
    closed_form: ClosedForm2D
    dates: np.ndarray = field(repr=False, default=None)

    @property
    def T(self) -> int:
        return len(self.z)

    @property
    def states(self) -> np.ndarray:
        return np.column_stack([self.z, self.y])

    def annual_return(self) -> np.ndarray:
        """Twelve-period log total return on the monthly grid (length T - 12)."""
        if self.frequency != "monthly":
            raise ValidationError("annual_return is defined on the monthly grid")
        window = np.lib.stride_tricks.sliding_window_view(self.div[1:], 12).sum(axis=1)
        return np.log((self.P[12:] + window) / self.P[:-12])

    def to_panel(self) -> Panel:
        """Columns on the first T - 1 dates (the last date has no forward return)."""
        n = self.T - 1
        cols = {k: getattr(self, k)[:n] for k in
                ("z", "y", "D", "div", "P", "P1", "pd", "s1", "s05", "s1plus", "dr", "er")}
        cols["r"] = self.r
        cols["dd"] = self.dd
        return Panel(self.dates[:n], cols, self.frequency)

    def metadata(self) -> dict:
        return {"seed": self.seed, "rng": RNG_ALGORITHM, "frequency": self.frequency,
                "T": self.T, "pd_bar": self.pd_bar}


def _period_params(params: ModelParams2D, frequency: str):
    """Per-period (rho_z, rho_y, sigma_z, sigma_y, sigma_D, growth scale)."""
    if frequency == "annual":
        return params.rho_z, params.rho_y, params.sigma_z, params.sigma_y, params.sigma_D, 1.0
    if frequency != "monthly":
        raise ValidationError(f"frequency must be annual or monthly, got {frequency!r}")
    out = []
    for rho, sig in ((params.rho_z, params.sigma_z), (params.rho_y, params.sigma_y)):
        rm = math.copysign(abs(rho) ** (1.0 / 12.0), rho)
        out += [rm, sig * math.sqrt((1.0 - rm * rm) / (1.0 - rho * rho))]
    return out[0], out[2], out[1], out[3], params.sigma_D / math.sqrt(12.0), 1.0 / 12.0


def stationary_cov(params: ModelParams2D) -> np.ndarray:
    """Stationary covariance of (z, y)."""
    S = np.vstack([params.sigma_z, params.sigma_y])
    Q = S @ params.Sigma @ S.T
    r = np.array([params.rho_z, params.rho_y])
    return Q / (1.0 - np.outer(r, r))


def simulate(params: ModelParams2D, pd_bar: float | None, T: int, seed: int,
             frequency: str = "annual", start=None) -> SimPath:
    """Simulate ``T`` periods of the two-state economy.

    Parameters
    ----------
    pd_bar : float or None
        Linearization point; ``None`` solves for the self-consistent mean.
    start : optional
        First year (annual) or month (monthly) of the date grid.
    """
    T = int(T)
    if T < 2:
        raise ValidationError("T must be at least 2")
    if pd_bar is None:
        pd_bar = solve_pd_bar(params)
    cf = solve_2d(params, pd_bar)
    rz, ry, sz, sy, sD, h = _period_params(params, frequency)

    rng = make_rng(seed)
    V = stationary_cov(params)
    x0 = _psd_sqrt(V) @ rng.standard_normal(2)
    eps = rng.standard_normal((T - 1, params.N)) @ _psd_sqrt(params.Sigma)

    z = _kernels.ar1_filter(rz, eps @ sz, x0[0])
    y = _kernels.ar1_filter(ry, eps @ sy, x0[1])
    jensen = 0.5 * float(sD @ params.Sigma @ sD)
    dd = h * (params.g_bar + z[:-1]) - jensen + eps @ sD
    logD = np.concatenate([[0.0], np.cumsum(dd)])

    pd = cf.A_pd + cf.B_pd * y + cf.C_pd * z
    s1 = cf.A_1 + cf.B_1 * y + cf.C_1 * z
    dr = pd - s1
    er = cf.A_er + cf.B_er * y
    if np.any(s1 >= pd):
        raise DataQualityError("simulated one-year strip exceeds the market value; parameters too volatile")
    s1plus = pd + np.log1p(-np.exp(s1 - pd))
    # half-year strip: cumulative claims interpolated log-linearly in maturity
    s05 = pd + np.log1p(-np.exp(0.5 * (s1plus - pd)))
    # levels of very long paths overflow; the log ratios above stay exact
    with np.errstate(over="ignore"):
        D = np.exp(logD)
        P = np.exp(logD + pd)
        P1 = np.exp(logD + s1)

    if frequency == "annual":
        div = D.copy()
        r = cf.kappa0 + cf.kappa1 * pd[1:] - pd[:-1] + dd
        dates = year_ends(1900 if start is None else int(start), T) if T <= 8000 else None
    else:
        div = D / 12.0
        r = np.log((P[1:] + div[1:]) / P[:-1])
        dates = month_ends("1988-01" if start is None else str(start), T)

    arrays = dict(z=z, y=y, D=D, pd=pd, s1=s1, s05=s05, s1plus=s1plus, dr=dr, P=P, P1=P1,
                  r=r, dd=dd, er=er, div=div)
    for a in arrays.values():
        a.setflags(write=False)
    return SimPath(**arrays, seed=int(seed), frequency=frequency, pd_bar=float(pd_bar),
                   closed_form=cf, dates=dates)


def cumulative_claims(path: SimPath, params: ModelParams2D, maturities) -> dict[float, np.ndarray]:
    """Value of dividends beyond maturity n, ``P^{n+}``, for each requested n.

    Integer maturities use exact strip prices; fractional ones interpolate
    ``log P^{n+}`` linearly between neighbouring integer maturities.
    """
    mats = [float(m) for m in maturities]
    for m in mats:
        if not any(abs(m - s) < 1e-12 for s in SUPPORTED_MATURITIES):
            raise ValidationError(f"unsupported maturity {m}; choose from {SUPPORTED_MATURITIES}")
    n_max = int(math.ceil(max(mats)))
    coeffs = solve_strip_coefficients(params.to_model_params(), n_max)
    X = path.states
    logq = [np.log(path.P)]
    q = path.P.copy()
    for n in range(1, n_max + 1):
        q = q - path.D * np.exp(coeffs.A[n] + X @ coeffs.B[n])
        if np.any(q <= 0):
            raise DataQualityError(f"claims beyond year {n} have non-positive value")
        logq.append(np.log(q))
    out = {}
    for m in mats:
        k = int(math.floor(m + 1e-12))
        f = m - k
        out[m] = np.exp(logq[k]) if f < 1e-12 else np.exp((1.0 - f) * logq[k] + f * logq[k + 1])
    return out


def synthesize_snapshots(path: SimPath, params: ModelParams2D, maturities=(0.5, 1.0, 2.0)) -> list[MarketSnapshot]:
    """Futures and discount curves implied by the simulated economy."""
    if path.dates is None:
        raise ValidationError("path has no calendar dates (T too long for the annual grid)")
    mats = sorted(float(m) for m in maturities)
    claims = cumulative_claims(path, params, mats)
    zcb = {m: math.exp(-m * params.r_f) for m in mats}
    out = []
    for t in range(path.T):
        fut = [(m, claims[m][t] / zcb[m]) for m in mats]
        out.append(MarketSnapshot(path.dates[t], path.P[t], fut, [(m, zcb[m]) for m in mats], path.D[t]))
    return out


def simulate_analyst_forecasts(path: SimPath, params: ModelParams2D, noise_sd=0.0, seed: int = 0,
                               noise_rho: float = 0.0) -> Panel:
    """Analyst-style growth forecasts implied by the growth state.

    ``e_k = g_bar + rho_z**(k-1) z_t + noise`` for k = 1, 2, 3, and ``ltg`` is
    the average expected growth over years 3 to 5 plus noise.  Noise can be
    persistent (AR(1) with ``noise_rho`` per period) and is independent across
    columns.
    """
    sd = np.broadcast_to(np.asarray(noise_sd, dtype=float), (4,))
    rng = make_rng(seed)
    rz = params.rho_z
    z = path.z
    cols = {}
    means = [params.g_bar + rz ** (k - 1) * z for k in (1, 2, 3)]
    means.append(params.g_bar + np.mean([rz ** (k - 1) for k in (3, 4, 5)]) * z)
    for name, m, s in zip(("e1", "e2", "e3", "ltg"), means, sd):
        if s > 0:
            shocks = rng.standard_normal(len(z)) * s * math.sqrt(1.0 - noise_rho ** 2)
            x0 = rng.standard_normal() * s
            noise = _kernels.ar1_filter(noise_rho, shocks[1:], x0)
        else:
            noise = np.zeros(len(z))
        cols[name] = m + noise
    if path.dates is None:
        raise ValidationError("path has no calendar dates")
    return Panel(path.dates, cols, path.frequency)
