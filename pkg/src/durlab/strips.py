"""Dividend-strip prices and valuation ratios from futures and bond quotes.

For a maturity n the claim on all dividends after n is worth the discounted
futures price, ``P^{n+} = Z(n) F(n)``, and the strip on dividends up to n is
the remainder ``P^n = P - P^{n+}``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import PchipInterpolator

from .data import DatedSeries, MarketSnapshot, Panel, infer_frequency
from .errors import DataQualityError, ExtrapolationError, ValidationError
from .tables import Table

log = logging.getLogger(__name__)

_KNOT_TOL = 1e-12


def interpolate_futures(curve, target: float, method: str = "pchip") -> float:
    """Futures price at ``target`` maturity from quoted (maturity, price) pairs.

    ``method="pchip"`` is a monotone piecewise cubic; ``"linear"`` is the
    piecewise-linear alternative.  No extrapolation.
    """
    pts = sorted((float(m), float(p)) for m, p in curve)
    if len(pts) < 2:
        # a single quote is usable only at its own maturity
        if len(pts) == 1 and abs(pts[0][0] - target) <= _KNOT_TOL:
            return pts[0][1]
        raise ValidationError("need at least two curve points to interpolate")
    m = np.array([a for a, _ in pts])
    p = np.array([b for _, b in pts])
    if np.any(np.diff(m) <= 0):
        raise ValidationError("curve maturities must be strictly increasing")
    t = float(target)
    if t < m[0] - _KNOT_TOL or t > m[-1] + _KNOT_TOL:
        raise ExtrapolationError(f"maturity {t} outside quoted range [{m[0]}, {m[-1]}]")
    hit = np.flatnonzero(np.abs(m - t) <= _KNOT_TOL)
    if hit.size:
        return float(p[hit[0]])
    if method == "linear":
        return float(np.interp(t, m, p))
    if method != "pchip":
        raise ValidationError(f"unknown interpolation method {method!r}")
    return float(PchipInterpolator(m, p, extrapolate=False)(t))


def interpolate_zcb(curve, target: float) -> float:
    """Discount factor at ``target``, log-linear in maturity, anchored at Z(0) = 1."""
    pts = [(0.0, 1.0)] + sorted((float(m), float(p)) for m, p in curve)
    m = np.array([a for a, _ in pts])
    lp = np.log([b for _, b in pts])
    t = float(target)
    if t < 0 or t > m[-1] + _KNOT_TOL:
        raise ExtrapolationError(f"maturity {t} outside zero-coupon range [0, {m[-1]}]")
    hit = np.flatnonzero(np.abs(m - t) <= _KNOT_TOL)
    if hit.size:
        return float(pts[hit[0]][1])
    return float(np.exp(np.interp(t, m, lp)))


@dataclass(frozen=True)
class StripPrices:
    p05: float
    p1: float
    p1plus: float
    p05plus: float


def strip_prices(snapshot: MarketSnapshot, maturities=(0.5, 1.0), interpolation: str = "pchip") -> StripPrices:
    """Half-year and one-year strip prices and the matching cumulative claims."""
    out = {}
    for n in maturities:
        n = float(n)
        plus = interpolate_zcb(snapshot.zcb, n) * interpolate_futures(snapshot.futures, n, interpolation)
        strip = snapshot.index_level - plus
        if not (math.isfinite(strip) and strip > 0):
            raise DataQualityError(f"{snapshot.date}: implied {n}-year strip price {strip:.6g} is not positive")
        out[n] = (strip, plus)
    return StripPrices(p05=out.get(0.5, (math.nan,))[0], p1=out.get(1.0, (math.nan,))[0],
                       p1plus=out.get(1.0, (0, math.nan))[1], p05plus=out.get(0.5, (0, math.nan))[1])


@dataclass(frozen=True)
class ValuationSeries:
    dr: DatedSeries
    pd: DatedSeries
    s1: DatedSeries
    s05: DatedSeries
    s1plus: DatedSeries
    p1: DatedSeries
    p1plus: DatedSeries

    COLUMNS = ("dr", "pd", "s1", "s05", "s1plus", "p1", "p1plus")

    def to_panel(self) -> Panel:
        return Panel.from_series({c: getattr(self, c) for c in self.COLUMNS})

    @classmethod
    def from_panel(cls, panel: Panel) -> "ValuationSeries":
        return cls(**{c: panel[c] for c in cls.COLUMNS})


def valuation_series(snapshots, policy: str = "fail-fast", interpolation: str = "pchip",
                     frequency: str | None = None) -> ValuationSeries:
    """Build dr, pd, s1, s05, s1plus and strip prices from dated snapshots.

    ``policy="skip"`` drops (and logs) dates whose strips cannot be formed;
    the resulting series may then contain calendar gaps.
    """
    if policy not in ("fail-fast", "skip"):
        raise ValidationError(f"policy must be 'fail-fast' or 'skip', got {policy!r}")
    snaps = list(snapshots)
    if not snaps:
        raise ValidationError("no snapshots")
    dates = [s.date for s in snaps]
    if any(b <= a for a, b in zip(dates, dates[1:])):
        raise ValidationError("snapshots must be sorted by date without duplicates")
    rows = []
    for s in snaps:
        if not s.trailing_dividend > 0:
            raise ValidationError(f"{s.date}: dividend must be positive for pd")
        try:
            sp = strip_prices(s, (0.5, 1.0), interpolation)
        except (DataQualityError, ExtrapolationError, ValidationError) as exc:
            if policy == "fail-fast":
                raise
            log.warning("skipping %s: %s", s.date, exc)
            continue
        rows.append((s.date, s.index_level, s.trailing_dividend, sp))
    if not rows:
        raise DataQualityError("no usable snapshot")
    d = np.array([r[0] for r in rows], dtype="datetime64[D]")
    P = np.array([r[1] for r in rows])
    D = np.array([r[2] for r in rows])
    p05 = np.array([r[3].p05 for r in rows])
    p1 = np.array([r[3].p1 for r in rows])
    p1plus = np.array([r[3].p1plus for r in rows])
    pd = np.log(P / D)
    s1 = np.log(p1 / D)
    cols = {
        "dr": pd - s1,
        "pd": pd,
        "s1": s1,
        "s05": np.log(p05 / D),
        "s1plus": np.log(p1plus / D),
        "p1": p1,
        "p1plus": p1plus,
    }
    freq = frequency or infer_frequency(np.array(dates, dtype="datetime64[D]"))
    gaps = len(rows) < len(snaps)
    return ValuationSeries(**{k: DatedSeries(d, v, freq, k, gaps) for k, v in cols.items()})


def duration_years(dr):
    """Valuation duration in years, ``exp(dr)``."""
    return np.exp(dr)


def near_year_share(dr):
    """Share of market value due to next year's dividends, ``exp(-dr)``."""
    return np.exp(-np.asarray(dr, dtype=float))


def _lag1_autocorr(x: np.ndarray) -> float:
    if len(x) < 3:
        return math.nan
    a, b = x[:-1] - x[:-1].mean(), x[1:] - x[1:].mean()
    den = math.sqrt(float(a @ a) * float(b @ b))
    return float(a @ b) / den if den > 0 else math.nan


@dataclass(frozen=True)
class DurationSummary:
    table: Table
    derived: dict


STAT_COLUMNS = ("series", "count", "mean", "std", "min", "p25", "p50", "p75", "max", "ac1")


def summarize(columns: dict[str, np.ndarray]) -> Table:
    rows = []
    for name, x in columns.items():
        x = np.asarray(x, dtype=float)
        n = len(x)
        if n == 0:
            raise ValidationError(f"{name}: empty series")
        std = float(np.std(x, ddof=1)) if n > 1 else math.nan
        q = np.percentile(x, [25, 50, 75])
        rows.append((name, n, float(x.mean()), std, float(x.min()), *map(float, q), float(x.max()),
                     _lag1_autocorr(x)))
    return Table(STAT_COLUMNS, rows)


def duration_stats(vs: ValuationSeries | dict) -> DurationSummary:
    """Summary statistics per ratio plus duration readings of dr.

    Derived fields: ``duration_at_mean`` = exp(mean dr), ``near_year_share_at_mean``
    and the same pair at the minimum and maximum of dr.
    """
    if isinstance(vs, ValuationSeries):
        cols = {c: getattr(vs, c).values for c in ("dr", "pd", "s05", "s1", "s1plus")}
    else:
        cols = {k: np.asarray(v.values if isinstance(v, DatedSeries) else v, dtype=float) for k, v in vs.items()}
    table = summarize(cols)
    derived = {}
    if "dr" in cols:
        dr = cols["dr"]
        for label, v in (("mean", dr.mean()), ("min", dr.min()), ("max", dr.max())):
            derived[f"duration_at_{label}"] = float(np.exp(v))
            derived[f"near_year_share_at_{label}"] = float(np.exp(-v))
    return DurationSummary(table, derived)
