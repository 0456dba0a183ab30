"""Mean-variance market timing on return forecasts.

With excess return ``r[t+1] = mu + x[t] + e[t+1]`` an investor with risk
aversion 1 holds ``(mu + x[t]) / sigma_e^2`` in the market.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .data import DatedSeries, format_float
from .errors import NumericalError, ValidationError
from .kvfile import dump_kv

log = logging.getLogger(__name__)


def timing_weights(mu: float, x: DatedSeries, sigma_eps: float, risk_aversion: float = 1.0) -> DatedSeries:
    """alpha_t = (mu + x_t) / (risk_aversion * sigma_eps^2)."""
    if not sigma_eps > 0:
        raise ValidationError("sigma_eps must be positive")
    if not risk_aversion > 0:
        raise ValidationError("risk_aversion must be positive")
    w = (mu + x.values) / (risk_aversion * sigma_eps ** 2)
    return DatedSeries(x.dates, w, x.frequency, "weight", x.allow_gaps)


def timing_sharpe(s0: float, r2: float) -> float:
    """Timing Sharpe ratio ``sqrt((s0^2 + r2) / (1 - r2))`` from buy-and-hold ``s0``."""
    s0, r2 = float(s0), float(r2)
    if not 0 <= r2 < 1:
        raise ValidationError(f"r2 must lie in [0, 1), got {r2}")
    if s0 < 0:
        raise ValidationError("s0 must be non-negative")
    if r2 == 0:
        return s0
    return math.sqrt((s0 * s0 + r2) / (1.0 - r2))


def timing_sharpe_exact(mu: float, sigma_x: float, sigma_eps: float) -> float:
    """Population per-period Sharpe ratio of the timing strategy under Gaussian x and e.

    Unlike :func:`timing_sharpe` this keeps the variance contributed by the
    fluctuating position itself:
    ``(mu^2 + sx^2) / sqrt(4 mu^2 sx^2 + 2 sx^4 + (mu^2 + sx^2) se^2)``.
    """
    m2, sx2, se2 = mu * mu, sigma_x * sigma_x, sigma_eps * sigma_eps
    den = math.sqrt(4 * m2 * sx2 + 2 * sx2 * sx2 + (m2 + sx2) * se2)
    return (m2 + sx2) / den if den > 0 else math.nan


def _sharpe(r: np.ndarray, periods_per_year: float) -> float:
    if len(r) < 2:
        return math.nan
    s = float(np.std(r, ddof=1))
    return float(np.mean(r)) / s * math.sqrt(periods_per_year) if s > 0 else math.nan


@dataclass(frozen=True)
class TimingResult:
    weights: DatedSeries
    strategy_returns: DatedSeries
    sharpe_annualized: float
    s0: float
    improvement_pct: float
    r2_oos: float
    s1_formula: float

    def summary(self) -> dict:
        return {"n": len(self.weights), "s0": self.s0, "s1": self.sharpe_annualized,
                "improvement_pct": self.improvement_pct, "r2_oos": self.r2_oos,
                "s1_formula": self.s1_formula}

    def to_kv(self) -> str:
        return dump_kv(self.summary())

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("date,weight,return\n")
            for d, w, r in zip(self.weights.dates, self.weights.values, self.strategy_returns.values):
                fh.write(f"{d},{format_float(w)},{format_float(r)}\n")


def backtest(forecasts: DatedSeries, realized: DatedSeries, sigma_window: int = 12,
             periods_per_year: int = 12, risk_aversion: float = 1.0, clamp: float | None = None) -> TimingResult:
    """Trade on forecasts with error variance estimated from past errors only.

    ``realized`` on date t is the return earned from t to t+1 and
    ``forecasts`` on date t its forecast made at t.  The error of date s is
    known from s+1 on, so the weight on date t uses errors of dates before t;
    the first ``sigma_window`` dates serve as warm-up and are skipped.
    """
    if sigma_window < 12:
        raise ValidationError("sigma_window must be at least 12")
    if len(forecasts) == 0 or len(realized) == 0:
        raise ValidationError("empty forecast or realized series")
    if forecasts.frequency != realized.frequency or not np.array_equal(forecasts.dates, realized.dates):
        raise ValidationError("forecasts and realized returns must be aligned on the same dates")
    f, r = forecasts.values, realized.values
    n = len(f)
    if n <= sigma_window + 1:
        raise ValidationError(f"need more than {sigma_window + 1} observations")
    log.info("skipping %d warm-up dates", sigma_window)
    e2 = np.concatenate([[0.0], np.cumsum((r - f) ** 2)])
    t = np.arange(sigma_window, n)
    sigma2 = e2[t] / t                         # mean squared error of dates 0..t-1
    if not np.all(sigma2 > 0):
        raise NumericalError("forecast errors have zero variance; weights are unbounded")
    alpha = f[t] / (risk_aversion * sigma2)
    if clamp is not None:
        alpha = np.clip(alpha, -clamp, clamp)
    strat = alpha * r[t]
    dates = forecasts.dates[t]
    s1 = _sharpe(strat, periods_per_year)
    s0 = _sharpe(r[t], periods_per_year)
    imp = 100.0 * (s1 / s0 - 1.0) if s0 > 0 else math.nan
    # out-of-sample R2 of the forecasts against the expanding realized mean
    cr = np.concatenate([[0.0], np.cumsum(r)])
    bench = cr[t] / t
    den = float(np.sum((r[t] - bench) ** 2))
    r2 = 1.0 - float(np.sum((r[t] - f[t]) ** 2)) / den if den > 0 else math.nan
    s1f = timing_sharpe(s0, r2) if (math.isfinite(r2) and 0 <= r2 < 1 and s0 >= 0) else math.nan
    freq = forecasts.frequency
    return TimingResult(DatedSeries(dates, alpha, freq, "weight", forecasts.allow_gaps),
                        DatedSeries(dates, strat, freq, "strategy_return", forecasts.allow_gaps),
                        s1, s0, imp, r2, s1f)
