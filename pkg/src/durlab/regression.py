"""Predictive regressions and their standard-error corrections.

Targets are forward aligned: the target value on date t is the outcome
realized after t (e.g. the return from t to t + h).  ``RegressionSpec.lead``
shifts a contemporaneous column forward when needed.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from . import _kernels
from .data import Panel
from .errors import DegeneracyError, ValidationError
from .tables import Table

log = logging.getLogger(__name__)

DEFAULT_NW_LAGS = 18
RANK_TOL = 1e-10


@dataclass(frozen=True)
class RegressionSpec:
    """What to regress on what.

    ``horizon_months`` is the overlap of the target (used by the Hodrick
    correction); ``one_period_target`` names the single-period outcome whose
    h-sum forms the target and is required by Hodrick when h > 1.
    """

    target: str
    predictors: tuple[str, ...]
    horizon_months: int = 1
    intercept: bool = True
    lead: int = 0
    one_period_target: str | None = None

    def __post_init__(self):
        preds = (self.predictors,) if isinstance(self.predictors, str) else tuple(self.predictors)
        if not preds:
            raise ValidationError("at least one predictor is required")
        if len(set(preds)) != len(preds):
            raise ValidationError(f"duplicate predictors in {preds}")
        if int(self.horizon_months) < 1:
            raise ValidationError("horizon_months must be >= 1")
        if int(self.lead) < 0:
            raise ValidationError("lead must be >= 0")
        object.__setattr__(self, "predictors", preds)
        object.__setattr__(self, "horizon_months", int(self.horizon_months))
        object.__setattr__(self, "lead", int(self.lead))

    @property
    def names(self) -> tuple[str, ...]:
        return (("const",) if self.intercept else ()) + self.predictors


def design(panel: Panel, spec: RegressionSpec):
    """(dates, y, X[, y1]) after applying the target lead."""
    n = len(panel)
    L = spec.lead
    m = n - L
    y = panel[spec.target].values[L:]
    Xp = panel.matrix(spec.predictors)[:m]
    X = np.column_stack([np.ones(m), Xp]) if spec.intercept else Xp
    dates = panel.dates[:m]
    y1 = None
    if spec.one_period_target is not None:
        y1 = panel[spec.one_period_target].values[L:]
    return dates, y, X, y1


@dataclass(frozen=True)
class OLSFit:
    beta: np.ndarray
    residuals: np.ndarray
    r2_adjusted: float
    r2: float
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    dates: np.ndarray = field(repr=False)
    names: tuple[str, ...] = ()

    def __iter__(self):
        return iter((self.beta, self.residuals, self.r2_adjusted))

    @property
    def n_obs(self) -> int:
        return len(self.y)

    @property
    def fitted(self) -> np.ndarray:
        return self.y - self.residuals

    def white_cov(self) -> np.ndarray:
        return newey_west(self.residuals, self.X, 0)


def _lstsq_qr(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(X)
    d = np.abs(np.diag(R))
    scale = max(d.max(initial=0.0), np.finfo(float).tiny)
    rank = int(np.sum(d > RANK_TOL * scale))
    if rank < X.shape[1]:
        raise DegeneracyError(f"design matrix has rank {rank} < {X.shape[1]}", rank=rank)
    return solve_triangular(R, Q.T @ y)


def fit_ols(X: np.ndarray, y: np.ndarray, intercept: bool = True, dates=None, names=()) -> OLSFit:
    n, p = X.shape
    k = p - 1 if intercept else p
    if n < k + 2:
        raise ValidationError(f"need at least {k + 2} observations, got {n}")
    beta = _lstsq_qr(X, y)
    resid = y - X @ beta
    tss = float(np.sum((y - y.mean()) ** 2))
    ssr = float(resid @ resid)
    if tss > 0:
        r2 = 1.0 - ssr / tss
        r2a = 1.0 - (1.0 - r2) * (n - 1) / (n - k - 1) if n - k - 1 > 0 else math.nan
    else:
        r2 = r2a = math.nan
    return OLSFit(beta, resid, r2a, r2, X, y, dates, tuple(names))


def ols(panel: Panel, spec: RegressionSpec) -> OLSFit:
    """Least squares by QR; unpacks as (beta, residuals, r2_adjusted)."""
    dates, y, X, _ = design(panel, spec)
    return fit_ols(X, y, spec.intercept, dates, spec.names)


def _floor_psd(V: np.ndarray, what: str) -> np.ndarray:
    V = 0.5 * (V + V.T)
    w, U = np.linalg.eigh(V)
    if w.min() < 0:
        log.info("%s: flooring %d negative eigenvalue(s), min %.3g", what, int(np.sum(w < 0)), w.min())
        V = (U * np.clip(w, 0.0, None)) @ U.T
    return V


def _sandwich(X: np.ndarray, meat: np.ndarray, what: str) -> np.ndarray:
    XtX_inv = np.linalg.inv(X.T @ X)
    return _floor_psd(XtX_inv @ meat @ XtX_inv, what)


def newey_west(residuals, design, lags: int = DEFAULT_NW_LAGS) -> np.ndarray:
    """HAC covariance of OLS coefficients with Bartlett weights 1 - j/(lags+1)."""
    e = np.asarray(residuals, dtype=float)
    X = np.asarray(design, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    lags = int(lags)
    if lags < 0 or lags >= len(e):
        raise ValidationError(f"lags must be in [0, n), got {lags}")
    return _sandwich(X, _kernels.bartlett_meat(X * e[:, None], lags), "newey_west")


def long_run_variance(x, lags: int) -> float:
    """Bartlett long-run variance of a demeaned scalar series (divided by n)."""
    x = np.asarray(x, dtype=float)
    u = (x - x.mean())[:, None]
    return float(_kernels.bartlett_meat(u, int(lags))[0, 0]) / len(x)


def hodrick_se(panel: Panel, spec: RegressionSpec) -> np.ndarray:
    """Hodrick 1B covariance for an h-period overlapping target.

    The meat is ``sum_t (e1_t * sum_{j<h} X_{t-j})(...)'`` where ``e1`` are
    residuals of the single-period target on the same regressors.  At h = 1
    this is exactly the White covariance.
    """
    h = spec.horizon_months
    dates, y, X, y1 = design(panel, spec)
    if h == 1 and y1 is None:
        y1 = y
    if y1 is None:
        raise ValidationError("horizon > 1 needs spec.one_period_target for the Hodrick correction")
    n = len(y)
    if n < h + X.shape[1]:
        raise ValidationError(f"need more than {h} observations for the {h}-period regressor sum")
    e1 = y1 - X @ _lstsq_qr(X, y1)
    c = np.vstack([np.zeros((1, X.shape[1])), np.cumsum(X, axis=0)])
    xsum = c[h:] - c[:-h]                    # rows t = h-1 .. n-1
    w = xsum * e1[h - 1:, None]
    return _sandwich(X, w.T @ w, "hodrick")


def stambaugh_adjust(panel: Panel, spec: RegressionSpec) -> float:
    """First-order bias-adjusted slope for a single persistent predictor.

    With û the AR(1) residuals of the predictor and gamma = cov(e, û)/var(û),
    the bias of the slope is -gamma (1 + 3 rho) / n, which is removed.
    """
    if len(spec.predictors) != 1:
        raise ValidationError("Stambaugh adjustment needs exactly one predictor")
    fit = ols(panel, spec)
    x = fit.X[:, -1]
    n = len(x)
    if np.ptp(x) == 0:
        raise ValidationError("predictor is constant; AR(1) fit fails")
    A = np.column_stack([np.ones(n - 1), x[:-1]])
    a, rho = _lstsq_qr(A, x[1:])
    u = x[1:] - a - rho * x[:-1]
    e = fit.residuals[:-1]
    gamma = float(np.cov(e, u)[0, 1] / np.var(u, ddof=1))
    return float(fit.beta[-1] + gamma * (1.0 + 3.0 * rho) / n)


# ---------------------------------------------------------------------------
# out-of-sample evaluation

@dataclass(frozen=True)
class OOSResult:
    dates: np.ndarray
    actual: np.ndarray
    forecast: np.ndarray
    benchmark: np.ndarray
    r2_oos: float
    n_train: int

    @property
    def e_model(self) -> np.ndarray:
        return self.actual - self.forecast

    @property
    def e_bench(self) -> np.ndarray:
        return self.actual - self.benchmark

    @property
    def pi(self) -> float:
        """Ratio of forecast count P to the initial estimation sample R."""
        return len(self.actual) / self.n_train


def r2_oos(actual, forecast, benchmark) -> float:
    a = np.asarray(actual, dtype=float)
    den = float(np.sum((a - benchmark) ** 2))
    if den == 0:
        raise ValidationError("benchmark errors are all zero")
    return 1.0 - float(np.sum((a - forecast) ** 2)) / den


def oos_evaluate(panel: Panel, spec: RegressionSpec, start_date, min_train: int = 24) -> OOSResult:
    """Expanding-window forecasts from ``start_date`` on.

    At origin t only pairs whose target is already realized are used (target
    date s with s + h <= t), both for the regression and for the historical
    mean benchmark.
    """
    dates, y, X, _ = design(panel, spec)
    h = spec.horizon_months
    start = np.datetime64(start_date, "D")
    t0 = int(np.searchsorted(dates, start))
    n_known = t0 - h + 1
    if n_known < min_train:
        raise ValidationError(f"only {max(n_known, 0)} realized observations before {start}; need {min_train}")
    if t0 >= len(y):
        raise ValidationError(f"start date {start} is after the last observation")
    XX = np.cumsum(X[:, :, None] * X[:, None, :], axis=0)
    Xy = np.cumsum(X * y[:, None], axis=0)
    cy = np.cumsum(y)
    origins = np.arange(t0, len(y))
    last = origins - h
    G, b = XX[last], Xy[last]
    # rank guard on each normal-equation system, relative to its diagonal scale
    d = np.sqrt(np.einsum("tii->ti", G))
    Gs = G / (d[:, :, None] * d[:, None, :])
    if np.min(np.linalg.svd(Gs, compute_uv=False)[:, -1]) < 1e-12:
        raise DegeneracyError("rank-deficient expanding-window design")
    beta = np.linalg.solve(G, b[:, :, None])[:, :, 0]
    fc = np.einsum("tk,tk->t", X[origins], beta)
    bench = cy[last] / (last + 1)
    actual = y[origins]
    return OOSResult(dates[origins], actual, fc, bench, r2_oos(actual, fc, bench), n_known)


def enc_test(e_model, e_bench, k_extra: int = 1, pi: float = 1.0) -> tuple[float, str]:
    """ENC-NEW encompassing statistic with a tabulated p-value range."""
    from ._enc_table import pvalue_range

    em = np.asarray(e_model, dtype=float)
    eb = np.asarray(e_bench, dtype=float)
    if em.shape != eb.shape:
        raise ValidationError("error series must have equal length")
    if not np.any(eb != 0):
        raise ValidationError("benchmark mean squared error is zero")
    mse_m = float(np.mean(em ** 2))
    if mse_m == 0:
        raise ValidationError("model mean squared error is zero")
    stat = len(em) * float(np.mean(eb * eb - eb * em)) / mse_m
    return stat, pvalue_range(stat, k_extra, pi)


def cw_test(e_model, e_bench, f_model, f_bench, lags: int = 0) -> tuple[float, float]:
    """Clark-West adjusted-MSPE test; one-sided normal p-value."""
    from scipy.stats import norm

    em = np.asarray(e_model, dtype=float)
    eb = np.asarray(e_bench, dtype=float)
    fm = np.asarray(f_model, dtype=float)
    fb = np.asarray(f_bench, dtype=float)
    if not (em.shape == eb.shape == fm.shape == fb.shape):
        raise ValidationError("error and forecast series must have equal length")
    if not np.any(eb != 0):
        raise ValidationError("benchmark mean squared error is zero")
    f = eb ** 2 - (em ** 2 - (fb - fm) ** 2)
    m = float(f.mean())
    v = long_run_variance(f, lags) if len(f) > lags else math.nan
    if v <= 0 or not math.isfinite(v):
        if m == 0:
            return 0.0, 0.5
        stat = math.copysign(math.inf, m)
    else:
        stat = m / math.sqrt(v / len(f))
    return stat, float(norm.sf(stat))


def format_pvalue(p: float) -> str:
    return f"{p:.3f}"


# ---------------------------------------------------------------------------
# resampling and rolling fits

def _spawn(seed, n):
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(int(seed)).spawn(n)]


def bootstrap_r2_ci(panel: Panel, spec: RegressionSpec, n_boot: int = 500, block_len: int = 18,
                    seed: int = 0, level: float = 0.95, jobs: int = 1) -> tuple[float, float, float]:
    """Circular block bootstrap percentile interval for adjusted R².

    Each replication draws from its own child of ``seed``, so results do not
    depend on ``jobs``.
    """
    if n_boot < 200:
        raise ValidationError("n_boot must be at least 200")
    _, y, X, _ = design(panel, spec)
    n = len(y)
    if not 1 <= block_len < n:
        raise ValidationError(f"block_len must be in [1, {n}), got {block_len}")
    point = fit_ols(X, y, spec.intercept).r2_adjusted
    n_blocks = -(-n // block_len)
    rngs = _spawn(seed, n_boot)

    def one(rng):
        idx = _kernels.block_indices(n, block_len, rng.integers(0, n, n_blocks))
        try:
            return fit_ols(X[idx], y[idx], spec.intercept).r2_adjusted
        except DegeneracyError:
            return math.nan

    if jobs > 1:
        with ThreadPoolExecutor(jobs) as ex:
            vals = np.array(list(ex.map(one, rngs)))
    else:
        vals = np.array([one(r) for r in rngs])
    vals = vals[np.isfinite(vals)]
    a = 100 * (1 - level) / 2
    lo, hi = np.percentile(vals, [a, 100 - a])
    return float(point), float(lo), float(hi)


def rolling_regression(panel: Panel, spec: RegressionSpec, window_months: int) -> Panel:
    """OLS over each window of ``window_months`` consecutive rows.

    Columns: coefficients (``const`` and ``beta_<name>``), ``r2``,
    ``resid_std`` and ``resid_last`` (the residual at the window end).  Rows
    whose window is degenerate are logged and dropped.
    """
    dates, y, X, _ = design(panel, spec)
    w = int(window_months)
    n = len(y)
    if not 2 <= w <= n:
        raise ValidationError(f"window must be in [2, {n}], got {w}")
    names = [("const" if nm == "const" else f"beta_{nm}") for nm in spec.names]
    out = {k: [] for k in names + ["r2", "resid_std", "resid_last"]}
    keep = []
    for end in range(w, n + 1):
        sl = slice(end - w, end)
        try:
            fit = fit_ols(X[sl], y[sl], spec.intercept)
        except (DegeneracyError, ValidationError) as exc:
            log.warning("window ending %s skipped: %s", dates[end - 1], exc)
            continue
        keep.append(end - 1)
        for nm, b in zip(names, fit.beta):
            out[nm].append(b)
        out["r2"].append(fit.r2 if math.isfinite(fit.r2) else 0.0)
        out["resid_std"].append(float(np.std(fit.residuals, ddof=X.shape[1])))
        out["resid_last"].append(float(fit.residuals[-1]))
    keep = np.array(keep, dtype=int)
    return Panel(dates[keep], {k: np.array(v) for k, v in out.items()}, panel.frequency,
                 allow_gaps=len(keep) < n - w + 1 or panel.allow_gaps)


SCAN_COLUMNS = ("predictors", "k", "n_obs", "r2", "r2_adj", "error")


def predictor_scan(panel: Panel, target: str, candidate_sets, lead: int = 0,
                   on_error: str = "raise") -> Table:
    """Fit every predictor subset; rows sorted by adjusted R², failures last.

    ``on_error="record"`` keeps going past degenerate subsets and reports the
    error text in the ``error`` column.
    """
    if on_error not in ("raise", "record"):
        raise ValidationError("on_error must be 'raise' or 'record'")
    rows = []
    for subset in candidate_sets:
        subset = (subset,) if isinstance(subset, str) else tuple(subset)
        label = "+".join(subset)
        try:
            fit = ols(panel, RegressionSpec(target, subset, lead=lead))
        except (DegeneracyError, ValidationError) as exc:
            if on_error == "raise":
                raise
            rows.append((label, len(subset), 0, math.nan, math.nan, str(exc)))
            continue
        rows.append((label, len(subset), fit.n_obs, fit.r2, fit.r2_adjusted, ""))
    rows.sort(key=lambda r: (math.isnan(r[4]), -r[4] if not math.isnan(r[4]) else 0.0))
    return Table(SCAN_COLUMNS, rows)


# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RegressionReport:
    names: tuple[str, ...]
    beta: np.ndarray
    se_nw: np.ndarray
    t_nw: np.ndarray
    se_hodrick: np.ndarray
    t_hodrick: np.ndarray
    beta_stambaugh: float
    r2: float
    r2_oos: float
    enc_stat: float
    enc_pvalue_range: str
    cw_stat: float
    cw_pvalue: float
    n_obs: int

    def as_items(self) -> dict:
        out = {"n_obs": self.n_obs}
        for i, nm in enumerate(self.names):
            out[f"beta_{nm}"] = float(self.beta[i])
            out[f"se_nw_{nm}"] = float(self.se_nw[i])
            out[f"t_nw_{nm}"] = float(self.t_nw[i])
            out[f"se_hodrick_{nm}"] = float(self.se_hodrick[i])
            out[f"t_hodrick_{nm}"] = float(self.t_hodrick[i])
        out.update(beta_stambaugh=self.beta_stambaugh, r2=self.r2, r2_oos=self.r2_oos,
                   enc_stat=self.enc_stat, enc_pvalue_range=self.enc_pvalue_range,
                   cw_stat=self.cw_stat, cw_pvalue=format_pvalue(self.cw_pvalue)
                   if math.isfinite(self.cw_pvalue) else "NA")
        return out

    def to_kv(self) -> str:
        from .kvfile import dump_kv
        return dump_kv(self.as_items())

    def csv_header(self) -> str:
        return ",".join(self.as_items())

    def csv_row(self) -> str:
        from .kvfile import format_value
        return ",".join(format_value(v) for v in self.as_items().values())


def _safe_t(beta, se):
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(se > 0, beta / se, np.nan)


def run_regression(panel: Panel, spec: RegressionSpec, nw_lags: int = DEFAULT_NW_LAGS,
                   oos_start=None, cw_lags: int | None = None) -> RegressionReport:
    """Full diagnostic battery for one specification."""
    fit = ols(panel, spec)
    se_nw = np.sqrt(np.diag(newey_west(fit.residuals, fit.X, min(nw_lags, fit.n_obs - 1))))
    try:
        se_h = np.sqrt(np.diag(hodrick_se(panel, spec)))
    except ValidationError as exc:
        log.warning("Hodrick standard errors unavailable: %s", exc)
        se_h = np.full(len(fit.beta), np.nan)
    b_st = stambaugh_adjust(panel, spec) if len(spec.predictors) == 1 else math.nan
    r2o = enc = cw = cwp = math.nan
    enc_p = "NA"
    if oos_start is not None:
        res = oos_evaluate(panel, spec, oos_start)
        r2o = res.r2_oos
        enc, enc_p = enc_test(res.e_model, res.e_bench, len(spec.predictors), res.pi)
        lags = spec.horizon_months - 1 if cw_lags is None else cw_lags
        cw, cwp = cw_test(res.e_model, res.e_bench, res.forecast, res.benchmark, lags)
    return RegressionReport(spec.names, fit.beta, se_nw, _safe_t(fit.beta, se_nw), se_h,
                            _safe_t(fit.beta, se_h), b_st, fit.r2_adjusted, r2o, enc, enc_p,
                            cw, cwp, fit.n_obs)
