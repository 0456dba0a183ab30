"""Persistence of expected dividend growth.

Three routes to ``rho_z``: regressions of longer-horizon analyst growth
forecasts on shorter ones, a regression of long-term growth forecasts on the
one-year forecast, and maximum likelihood on realized dividend growth with the
latent-AR(1) model::

    dd[t+1] = g + z[t] + sigma_d e[t+1]
    z[t+1]  = rho_z z[t] + sigma_z u[t+1],      corr(e, u) = c (held fixed)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from . import _kernels
from .data import DatedSeries, Panel, align
from .errors import DegeneracyError, EstimationError, NumericalError, ValidationError
from .regression import _lstsq_qr, fit_ols, newey_west
from .simulate import make_rng

log = logging.getLogger(__name__)

N_STARTS = 10
CORR_MAX = 0.9


# ---------------------------------------------------------------------------
# analyst-forecast system

@dataclass(frozen=True)
class RhoZSystemFit:
    rho_z_hat: float
    intercept_hat: float
    se_rho_z: float
    t_rho_z: float
    n: int
    r2: float
    variant: str
    se_intercept: float = math.nan

    @property
    def g_hat(self) -> float:
        """Implied mean growth, intercept / (1 - rho_z)."""
        return self.intercept_hat / (1.0 - self.rho_z_hat) if self.rho_z_hat != 1 else math.nan


_VARIANTS = {"Y1Y3": (("e1", "e2"), ("e2", "e3")), "Y1Y2": (("e1", "e2"),)}


def _system_rows(M: dict, variant: str):
    if variant not in _VARIANTS:
        raise ValidationError(f"variant must be one of {sorted(_VARIANTS)}, got {variant!r}")
    pairs = _VARIANTS[variant]
    x = np.stack([M[a] for a, _ in pairs], axis=1)        # (n, n_eq)
    y = np.stack([M[b] for _, b in pairs], axis=1)
    return x, y


def _fit_system(x: np.ndarray, y: np.ndarray, hac_lags: int, variant: str) -> RhoZSystemFit:
    n, q = x.shape
    X = np.column_stack([np.ones(n * q), x.ravel()])
    Y = y.ravel()
    beta = _lstsq_qr(X, Y)
    e = Y - X @ beta
    # moments summed across equations per date, then Bartlett HAC over dates
    m = (X * e[:, None]).reshape(n, q, 2).sum(axis=1)
    XtX_inv = np.linalg.inv(X.T @ X)
    V = XtX_inv @ _kernels.bartlett_meat(m, min(int(hac_lags), n - 1)) @ XtX_inv
    se = np.sqrt(np.clip(np.diag(V), 0.0, None))
    tss = float(np.sum((Y - Y.mean()) ** 2))
    r2 = 1.0 - float(e @ e) / tss if tss > 0 else math.nan
    t = beta[1] / se[1] if se[1] > 0 else (0.0 if beta[1] == 0 else math.copysign(math.inf, beta[1]))
    return RhoZSystemFit(float(beta[1]), float(beta[0]), float(se[1]), float(t), n, r2, variant,
                         float(se[0]))


def estimate_rhoz_system(forecast_panel: Panel, variant: str = "Y1Y3", hac_lags: int = 18) -> RhoZSystemFit:
    """Pooled regression of next-horizon forecasts on the preceding horizon.

    ``Y1Y3`` stacks (e2 on e1) and (e3 on e2); ``Y1Y2`` uses only the first.
    Standard errors are Driscoll-Kraay style: per-date moments are summed
    over equations and then Newey-West weighted over dates.
    """
    need = {"e1", "e2"} | ({"e3"} if variant == "Y1Y3" else set())
    missing = sorted(need - set(forecast_panel.names))
    if missing:
        raise ValidationError(f"forecast panel lacks columns {missing}")
    if len(forecast_panel) < 30:
        raise ValidationError("need at least 30 dates")
    M = {c: forecast_panel[c].values for c in need}
    x, y = _system_rows(M, variant)
    return _fit_system(x, y, hac_lags, variant)


def rolling_rhoz(forecast_panel: Panel, window: int, variant: str = "Y1Y3", hac_lags: int = 18) -> DatedSeries:
    """System estimate over each window of ``window`` consecutive dates."""
    n = len(forecast_panel)
    window = int(window)
    if not 3 <= window <= n:
        raise ValidationError(f"window must be in [3, {n}], got {window}")
    cols = {c: forecast_panel[c].values for c in ("e1", "e2", "e3") if c in forecast_panel}
    x, y = _system_rows(cols, variant)
    keep, vals = [], []
    for end in range(window, n + 1):
        sl = slice(end - window, end)
        try:
            fit = _fit_system(x[sl], y[sl], min(hac_lags, window - 1), variant)
        except (DegeneracyError, ValidationError, np.linalg.LinAlgError) as exc:
            log.warning("window ending %s skipped: %s", forecast_panel.dates[end - 1], exc)
            continue
        keep.append(end - 1)
        vals.append(fit.rho_z_hat)
    return DatedSeries(forecast_panel.dates[keep], vals, forecast_panel.frequency, "rho_z",
                       allow_gaps=len(keep) < n - window + 1 or forecast_panel.allow_gaps)


@dataclass(frozen=True)
class LTGFit:
    slope: float
    intercept: float
    se_slope: float
    t_slope: float
    se_intercept: float
    t_intercept: float
    r2: float
    n: int


def estimate_rhoz_ltg(ltg: DatedSeries, e1: DatedSeries, hac_lags: int = 18) -> LTGFit:
    """Regress ``ln(1 + LTG)`` on the one-year growth forecast, Newey-West SEs."""
    panel = align(ltg.rename("ltg"), e1.rename("e1"))
    y = np.log1p(panel["ltg"].values)
    x = panel["e1"].values
    X = np.column_stack([np.ones(len(x)), x])
    fit = fit_ols(X, y)
    se = np.sqrt(np.diag(newey_west(fit.residuals, X, min(hac_lags, len(x) - 1))))
    t = [b / s if s > 0 else (0.0 if b == 0 else math.copysign(math.inf, b)) for b, s in zip(fit.beta, se)]
    return LTGFit(float(fit.beta[1]), float(fit.beta[0]), float(se[1]), float(t[1]), float(se[0]),
                  float(t[0]), fit.r2, len(x))


# ---------------------------------------------------------------------------
# likelihood models

def kalman_loglik(params, corr: float, dg) -> float:
    """Exact Gaussian log-likelihood; ``params = (g, rho_z, sigma_d, sigma_z)``."""
    g, rho, sd, sz = map(float, params)
    if sd < 0 or sz < 0:
        raise ValidationError("volatilities must be non-negative")
    if not abs(rho) < 1:
        raise ValidationError("rho_z must lie in (-1, 1)")
    if abs(corr) > CORR_MAX + 1e-12:
        raise ValidationError(f"|corr| must not exceed {CORR_MAX}")
    ll = _kernels.kalman_loglik(np.asarray(dg, dtype=float), g, rho, sd, sz, float(corr))
    if not math.isfinite(ll):
        raise NumericalError("non-finite log-likelihood (degenerate variance)")
    return ll


def simulate_dividend_growth(n: int, g: float, rho_z: float, sigma_d: float, sigma_z: float,
                             corr: float = 0.0, seed: int = 0) -> np.ndarray:
    """Draw ``n`` annual growth observations from the latent-AR(1) model."""
    rng = make_rng(seed)
    shocks = rng.standard_normal((n, 2))
    e = shocks[:, 0]
    u = corr * shocks[:, 0] + math.sqrt(1.0 - corr * corr) * shocks[:, 1]
    z0 = rng.standard_normal() * sigma_z / math.sqrt(1.0 - rho_z * rho_z)
    z = _kernels.ar1_filter(rho_z, sigma_z * u, z0)     # z[0..n]
    return g + z[:-1] + sigma_d * e


def _hessian(f, x, steps):
    k = len(x)
    H = np.empty((k, k))
    f0 = f(x)
    for i in range(k):
        ei = np.zeros(k)
        ei[i] = steps[i]
        H[i, i] = (f(x + ei) - 2 * f0 + f(x - ei)) / steps[i] ** 2
        for j in range(i):
            ej = np.zeros(k)
            ej[j] = steps[j]
            H[i, j] = H[j, i] = (f(x + ei + ej) - f(x + ei - ej) - f(x - ei + ej) + f(x - ei - ej)) / (
                4 * steps[i] * steps[j])
    return H


def _standard_errors(negll, theta, free_mask):
    """SEs from the inverse numerical Hessian over the ``free_mask`` coordinates."""
    se = np.full(len(theta), math.nan)
    idx = np.flatnonzero(free_mask)
    if idx.size == 0:
        return se

    def sub(v):
        full = theta.copy()
        full[idx] = v
        return negll(full)

    x = theta[idx]
    steps = 1e-4 * np.maximum(np.abs(x), 1e-2)
    H = _hessian(sub, x, steps)
    try:
        w = np.linalg.eigvalsh(H)
        if w.min() <= 0:
            return se
        se[idx] = np.sqrt(np.diag(np.linalg.inv(H)))
    except np.linalg.LinAlgError:
        pass
    return se


def _nelder_mead(fun, starts, bounds):
    best = None
    for x0 in starts:
        x0 = np.clip(x0, [b[0] for b in bounds], [b[1] for b in bounds])
        res = None
        for _ in range(3):      # restarts refresh a collapsed simplex
            res = minimize(fun, x0, method="Nelder-Mead", bounds=bounds,
                           options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": 6000, "maxfev": 12000})
            if res.x is not None and np.allclose(res.x, x0, atol=1e-9):
                break
            x0 = res.x
        if math.isfinite(res.fun) and (best is None or res.fun < best.fun):
            best = res
    return best


@dataclass(frozen=True)
class StateSpaceFit:
    rho_z_hat: float
    g_hat: float
    sigma_d_hat: float
    sigma_z_hat: float
    se: dict
    loglik: float
    aic: float
    bic: float
    restricted: bool
    shock_correlation: float
    n: int
    k: int

    def t_stat(self, name: str) -> float:
        est = {"rho_z": self.rho_z_hat, "g": self.g_hat, "sigma_d": self.sigma_d_hat,
               "sigma_z": self.sigma_z_hat}[name]
        s = self.se.get(name, math.nan)
        return est / s if s and math.isfinite(s) and s > 0 else math.nan

    def rho_ci(self, level: float = 0.95) -> tuple[float, float]:
        from scipy.stats import norm
        s = self.se.get("rho_z", math.nan)
        q = norm.ppf(0.5 + level / 2)
        return self.rho_z_hat - q * s, self.rho_z_hat + q * s


def _check_growth(dg, minimum):
    dg = np.asarray(dg.values if isinstance(dg, DatedSeries) else dg, dtype=float)
    if dg.ndim != 1 or len(dg) < minimum:
        raise ValidationError(f"need at least {minimum} observations")
    if not np.all(np.isfinite(dg)):
        raise ValidationError("growth series has non-finite values")
    if np.ptp(dg) == 0:
        raise EstimationError("growth series is constant")
    return dg


def _fit_one_corr(dg, corr, restricted, n_starts, seed, warm=None, sigma_d=None) -> StateSpaceFit:
    n = len(dg)
    mu, sd = float(dg.mean()), float(dg.std())
    lo_s, hi_s = math.log(1e-8 * sd), math.log(10.0 * sd)
    rmax = math.atanh(0.999)
    # free coordinates of u = (g, atanh rho, log sigma_d, log sigma_z)
    free = [0] + ([] if restricted else [1]) + ([] if sigma_d is not None else [2]) + [3]
    base = np.array([mu, 0.0, math.log(sigma_d) if sigma_d else -np.inf, 0.0])

    def unpack(v):
        u = base.copy()
        u[free] = v
        return u[0], math.tanh(u[1]), (sigma_d if sigma_d is not None else math.exp(u[2])), math.exp(u[3])

    def negll(v):
        ll = _kernels.kalman_loglik(dg, *unpack(v), corr)
        return -ll if math.isfinite(ll) else 1e300

    # documented start box: g near the sample mean, rho in [-0.8, 0.8],
    # each volatility between 5% and 100% of the sample standard deviation
    rng = make_rng(seed)
    starts = [np.array([mu, 0.0, math.log(sd / math.sqrt(2)), math.log(sd / math.sqrt(2))])]
    for _ in range(n_starts - 1):
        starts.append(np.array([mu + rng.uniform(-1, 1) * sd / math.sqrt(n), math.atanh(rng.uniform(-0.8, 0.8)),
                                math.log(sd * rng.uniform(0.05, 1.0)), math.log(sd * rng.uniform(0.05, 1.0))]))
    if warm is not None:
        starts.insert(0, np.asarray(warm, dtype=float))
    starts = [st[free] for st in starts]
    box = [(mu - 5 * sd, mu + 5 * sd), (-rmax, rmax), (lo_s, hi_s), (lo_s, hi_s)]
    best = _nelder_mead(negll, starts, [box[i] for i in free])
    if best is None:
        raise EstimationError(f"likelihood optimization failed on all {len(starts)} starts (corr={corr})")

    g, rho, s_d, s_z = unpack(best.x)
    theta = np.array([g, rho, s_d, s_z])

    def negll_nat(th):
        if not abs(th[1]) < 1 or th[2] < 0 or th[3] < 0:
            return 1e300
        ll = _kernels.kalman_loglik(dg, th[0], th[1], th[2], th[3], corr)
        return -ll if math.isfinite(ll) else 1e300

    # boundary estimates (volatility ~ 0) are held fixed when forming the Hessian
    tiny = 1e-3 * sd
    free_mask = np.array([True, not restricted, sigma_d is None and s_d > tiny, s_z > tiny])
    se_vec = _standard_errors(negll_nat, theta, free_mask)
    se = dict(zip(("g", "rho_z", "sigma_d", "sigma_z"), se_vec))
    if restricted:
        se["rho_z"] = math.nan
    k = len(free)
    ll = -float(best.fun)
    return StateSpaceFit(float(rho), float(g), float(s_d), float(s_z), se, ll, 2 * k - 2 * ll,
                         k * math.log(n) - 2 * ll, restricted, float(corr), n, k)


def _check_corr(corr):
    corr = float(corr)
    if abs(corr) > CORR_MAX + 1e-12:
        raise ValidationError(f"shock correlation {corr} outside [-{CORR_MAX}, {CORR_MAX}]")
    return corr


def fit_state_space(dg, restricted: bool = False, corr_grid=(0.0,), n_starts: int = N_STARTS,
                    seed: int = 0, sigma_d: float | None = None) -> list[StateSpaceFit]:
    """Maximum-likelihood fits, one per fixed shock correlation.

    Each fit runs Nelder-Mead from ``n_starts`` starting points (plus, for the
    unrestricted model, the restricted optimum, so the unrestricted
    likelihood can never fall below the restricted one).  ``sigma_d`` pins
    the realized-growth volatility instead of estimating it.
    """
    dg = _check_growth(dg, 20)
    if sigma_d is not None and not sigma_d > 0:
        raise ValidationError("fixed sigma_d must be positive")
    out = []
    for corr in corr_grid:
        corr = _check_corr(corr)
        r = _fit_one_corr(dg, corr, True, n_starts, seed, sigma_d=sigma_d)
        if restricted:
            out.append(r)
            continue
        warm = np.array([r.g_hat, 0.0, math.log(r.sigma_d_hat), math.log(r.sigma_z_hat)])
        out.append(_fit_one_corr(dg, corr, False, n_starts, seed, warm=warm, sigma_d=sigma_d))
    return out


def corr_sweep(dg, corr_grid, n_starts: int = N_STARTS, seed: int = 0) -> list[StateSpaceFit]:
    """Unrestricted fits across shock correlations with sigma_d held at its corr = 0 estimate."""
    dg = _check_growth(dg, 20)
    base = fit_state_space(dg, corr_grid=(0.0,), n_starts=n_starts, seed=seed)[0]
    sd = max(base.sigma_d_hat, 1e-8 * float(dg.std()))
    return fit_state_space(dg, corr_grid=corr_grid, n_starts=n_starts, seed=seed, sigma_d=sd)


def profile_loglik(dg, rho_z: float, corr: float = 0.0, fit: StateSpaceFit | None = None) -> float:
    """Log-likelihood maximized over (g, sigma_d, sigma_z) with rho_z held fixed."""
    dg = _check_growth(dg, 20)
    corr = _check_corr(corr)
    rho = float(rho_z)
    if not abs(rho) < 1:
        raise ValidationError("rho_z must lie in (-1, 1)")
    mu, sd = float(dg.mean()), float(dg.std())
    floor = 1e-6 * sd
    lo_s, hi_s = math.log(1e-8 * sd), math.log(10.0 * sd)
    bounds = [(mu - 5 * sd, mu + 5 * sd), (lo_s, hi_s), (lo_s, hi_s)]

    def negll(u):
        ll = _kernels.kalman_loglik(dg, u[0], rho, math.exp(u[1]), math.exp(u[2]), corr)
        return -ll if math.isfinite(ll) else 1e300

    # the likelihood can be bimodal (noisy growth vs. a clean AR(1)), so start in both basins
    q = math.sqrt(1.0 - rho * rho)
    starts = [np.array([mu, math.log(0.05 * sd), math.log(sd * q)]),
              np.array([mu, math.log(0.7 * sd), math.log(0.7 * sd * q)])]
    if fit is not None:
        starts.insert(0, np.array([fit.g_hat, math.log(max(fit.sigma_d_hat, floor)),
                                   math.log(max(fit.sigma_z_hat, floor))]))
    best = _nelder_mead(negll, starts, bounds)
    if best is None:
        raise EstimationError(f"profile likelihood failed at rho_z={rho}")
    return -float(best.fun)


def rho_lr_stat(dg, fit: StateSpaceFit, rho_z: float) -> float:
    """Likelihood-ratio statistic for ``rho_z`` against the unrestricted fit."""
    return max(0.0, 2.0 * (fit.loglik - profile_loglik(dg, rho_z, fit.shock_correlation, fit)))


def rho_profile_ci(dg, fit: StateSpaceFit, level: float = 0.95, step: float = 0.05) -> tuple[float, float]:
    """Hull of the profile-likelihood confidence set for rho_z.

    Wald intervals from the Hessian understate uncertainty when the
    likelihood has a second mode near sigma_z = 0, which is common at
    annual sample sizes; the likelihood-ratio set does not.
    """
    from scipy.stats import chi2
    crit = float(chi2.ppf(level, 1))
    inside = lambda r: rho_lr_stat(dg, fit, r) <= crit
    grid = np.arange(-0.99, 0.99 + 1e-9, step)
    ok = [r for r in grid if inside(r)] or [fit.rho_z_hat]

    def edge(a, b):         # a inside, b outside
        for _ in range(20):
            m = 0.5 * (a + b)
            a, b = (m, b) if inside(m) else (a, m)
        return a

    lo, hi = min(ok), max(ok)
    lo = edge(lo, max(lo - step, -0.999)) if lo - step > -0.999 else -0.999
    hi = edge(hi, min(hi + step, 0.999)) if hi + step < 0.999 else 0.999
    return float(min(lo, fit.rho_z_hat)), float(max(hi, fit.rho_z_hat))


@dataclass(frozen=True)
class ARMAFit:
    model: str
    coef: float
    g: float
    sigma: float
    se: dict
    loglik: float
    aic: float
    bic: float
    n: int


def _ar1_loglik(y, g, gam, sigma):
    if not abs(gam) < 1 or sigma <= 0:
        return -math.inf
    v0 = sigma * sigma / (1 - gam * gam)
    mu = g / (1 - gam)
    e0 = y[0] - mu
    ll = -0.5 * (math.log(2 * math.pi * v0) + e0 * e0 / v0)
    e = y[1:] - g - gam * y[:-1]
    ll -= 0.5 * (len(e) * math.log(2 * math.pi * sigma * sigma) + float(e @ e) / (sigma * sigma))
    return ll


def fit_arma(dg, model: str) -> ARMAFit:
    """Exact Gaussian MLE of an AR(1) or MA(1) for dividend growth.

    AR1: ``dd[t+1] = g + gamma dd[t] + sigma e[t+1]``;
    MA1: ``dd[t+1] = g + sigma (e[t+1] + chi e[t])``.
    """
    dg = _check_growth(dg, 10)
    if model not in ("AR1", "MA1"):
        raise ValidationError("model must be 'AR1' or 'MA1'")
    mu, sd = float(dg.mean()), float(dg.std())
    lo_s, hi_s = math.log(1e-8 * sd), math.log(10 * sd)
    cmax = math.atanh(0.999)

    def ll_nat(g, c, s):
        if model == "AR1":
            return _ar1_loglik(dg, g, c, s)
        if not abs(c) < 1 or s <= 0:
            return -math.inf
        return _kernels.ma1_loglik(dg, g, c, s)

    def negll(u):
        ll = ll_nat(u[0], math.tanh(u[1]), math.exp(u[2]))
        return -ll if math.isfinite(ll) else 1e300

    starts = [np.array([mu if model == "MA1" else mu * (1 - c), math.atanh(c), math.log(sd)])
              for c in (0.0, -0.5, 0.5, 0.2, -0.2)]
    bounds = [(mu - 5 * sd - abs(mu), mu + 5 * sd + abs(mu)), (-cmax, cmax), (lo_s, hi_s)]
    best = _nelder_mead(negll, starts, bounds)
    if best is None:
        raise EstimationError(f"{model} likelihood optimization failed")
    g, c, s = best.x[0], math.tanh(best.x[1]), math.exp(best.x[2])
    theta = np.array([g, c, s])

    def negll_nat(th):
        ll = ll_nat(*th)
        return -ll if math.isfinite(ll) else 1e300

    se_vec = _standard_errors(negll_nat, theta, np.array([True, True, True]))
    ll = -float(best.fun)
    n, k = len(dg), 3
    return ARMAFit(model, float(c), float(g), float(s), dict(zip(("g", "coef", "sigma"), se_vec)),
                   ll, 2 * k - 2 * ll, k * math.log(n) - 2 * ll, n)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ErrorLink:
    correlation: float
    slope: float
    intercept: float
    se_slope: float
    t_slope: float
    n: int


def error_link(rhoz_series: DatedSeries, prediction_errors: DatedSeries, hac_lags: int = 18) -> ErrorLink:
    """Correlation of forecast errors with rolling persistence, plus an OLS link."""
    panel = align(rhoz_series.rename("rho_z"), prediction_errors.rename("err"))
    x, y = panel["rho_z"].values, panel["err"].values
    if len(x) < 3:
        raise ValidationError("need at least 3 common dates")
    X = np.column_stack([np.ones(len(x)), x])
    fit = fit_ols(X, y)
    se = float(np.sqrt(newey_west(fit.residuals, X, min(hac_lags, len(x) - 1))[1, 1]))
    corr = float(np.corrcoef(x, y)[0, 1])
    t = fit.beta[1] / se if se > 0 else (0.0 if fit.beta[1] == 0 else math.copysign(math.inf, fit.beta[1]))
    return ErrorLink(corr, float(fit.beta[1]), float(fit.beta[0]), se, float(t), len(x))


def implied_error_term(rho_z, z, kappa1: float = 0.98) -> float:
    """Sample mean of ``kappa1 rho_z^2 z / (1 - kappa1 rho_z)``."""
    r = np.asarray(rho_z.values if isinstance(rho_z, DatedSeries) else rho_z, dtype=float)
    zz = np.asarray(z.values if isinstance(z, DatedSeries) else z, dtype=float)
    if r.shape != zz.shape:
        raise ValidationError("rho_z and z must be aligned")
    return float(np.mean(kappa1 * r * r * zz / (1.0 - kappa1 * r)))
