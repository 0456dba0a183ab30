"""Calendar-indexed containers, CSV ingestion and return conventions.

Dates are stored as ``datetime64[D]``.  Containers are frozen and their
arrays are marked read-only, so they can be shared between workers.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ParseError, SchemaError, ValidationError

FREQUENCIES = ("monthly", "weekly", "annual")
SCHEMAS = ("series", "panel", "snapshot_panel", "forecast_panel")
FORECAST_COLUMNS = ("e1", "e2", "e3", "ltg")


def format_float(x: float) -> str:
    """12 significant digits; blank for NaN."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    return f"{float(x):.12g}"


def format_maturity(m: float) -> str:
    s = f"{float(m):.4f}".rstrip("0").rstrip(".")
    return s or "0"


def _as_dates(dates) -> np.ndarray:
    out = np.asarray(dates)
    if out.dtype.kind != "M":
        out = np.asarray([np.datetime64(str(d), "D") for d in out], dtype="datetime64[D]")
    return out.astype("datetime64[D]")


def _period_steps(dates: np.ndarray, frequency: str) -> np.ndarray:
    if frequency == "monthly":
        return np.diff(dates.astype("datetime64[M]").astype(np.int64))
    if frequency == "annual":
        return np.diff(dates.astype("datetime64[Y]").astype(np.int64))
    days = np.diff(dates.astype(np.int64))
    return np.rint(days / 7.0).astype(np.int64)


def infer_frequency(dates) -> str:
    """Guess the grid from median spacing (annual, monthly or weekly)."""
    dates = _as_dates(dates)
    if len(dates) < 2:
        return "monthly"
    med = float(np.median(np.diff(dates.astype(np.int64))))
    if med >= 300:
        return "annual"
    if med >= 25:
        return "monthly"
    return "weekly"


def _check_grid(dates: np.ndarray, frequency: str, allow_gaps: bool) -> None:
    if frequency not in FREQUENCIES:
        raise ValidationError(f"unknown frequency {frequency!r}")
    if len(dates) < 2:
        return
    d = np.diff(dates.astype(np.int64))
    if np.any(d <= 0):
        i = int(np.argmax(d <= 0)) + 1
        kind = "duplicate" if d[i - 1] == 0 else "decreasing"
        raise ValidationError(f"{kind} date {dates[i]}")
    steps = _period_steps(dates, frequency)
    if frequency == "weekly":
        bad = (d < 4) | ((d > 10) & ~allow_gaps)
    else:
        bad = steps < 1 if allow_gaps else steps != 1
    if np.any(bad):
        i = int(np.argmax(bad)) + 1
        raise ValidationError(f"date {dates[i]} is not on the {frequency} grid")


def _frozen(a, dtype=float) -> np.ndarray:
    out = np.array(a, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class DatedSeries:
    """Values observed on a regular calendar grid.

    ``allow_gaps`` admits whole missing periods (used when a skip policy drops
    dates); by default consecutive observations must be one period apart.
    """

    dates: np.ndarray
    values: np.ndarray
    frequency: str = "monthly"
    name: str = "value"
    allow_gaps: bool = False

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates), "datetime64[D]")
        values = _frozen(self.values)
        if values.ndim != 1 or len(values) != len(dates):
            raise ValidationError(f"{self.name}: {len(values)} values for {len(dates)} dates")
        if not np.all(np.isfinite(values)):
            raise ValidationError(f"{self.name}: missing or non-finite value")
        _check_grid(dates, self.frequency, self.allow_gaps)
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    def rename(self, name: str) -> "DatedSeries":
        return DatedSeries(self.dates, self.values, self.frequency, name, self.allow_gaps)

    def slice(self, start=None, end=None) -> "DatedSeries":
        mask = np.ones(len(self), bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return DatedSeries(self.dates[mask], self.values[mask], self.frequency, self.name, self.allow_gaps)


@dataclass(frozen=True)
class Panel:
    """Named columns on one shared date grid."""

    dates: np.ndarray
    columns: Mapping[str, np.ndarray]
    frequency: str = "monthly"
    allow_gaps: bool = False

    def __post_init__(self):
        dates = _frozen(_as_dates(self.dates), "datetime64[D]")
        _check_grid(dates, self.frequency, self.allow_gaps)
        cols = {}
        for name, v in self.columns.items():
            v = _frozen(v)
            if v.shape != (len(dates),):
                raise ValidationError(f"column {name!r} has {v.size} values for {len(dates)} dates")
            if not np.all(np.isfinite(v)):
                raise ValidationError(f"column {name!r}: missing or non-finite value")
            cols[str(name)] = v
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "columns", cols)

    @classmethod
    def from_series(cls, series: Iterable[DatedSeries] | Mapping[str, DatedSeries]) -> "Panel":
        items = list(series.items()) if isinstance(series, Mapping) else [(s.name, s) for s in series]
        if not items:
            raise ValidationError("no series given")
        first = items[0][1]
        for name, s in items[1:]:
            if s.frequency != first.frequency or not np.array_equal(s.dates, first.dates):
                raise ValidationError(f"column {name!r} is on a different date grid")
        gaps = any(s.allow_gaps for _, s in items)
        return cls(first.dates, {n: s.values for n, s in items}, first.frequency, gaps)

    def __len__(self):
        return len(self.dates)

    def __contains__(self, name):
        return name in self.columns

    def __getitem__(self, name: str) -> DatedSeries:
        try:
            v = self.columns[name]
        except KeyError:
            raise ValidationError(f"panel has no column {name!r}") from None
        return DatedSeries(self.dates, v, self.frequency, name, self.allow_gaps)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def matrix(self, names: Sequence[str]) -> np.ndarray:
        return np.column_stack([self[n].values for n in names]) if names else np.empty((len(self), 0))

    def with_columns(self, extra: Mapping[str, np.ndarray]) -> "Panel":
        cols = dict(self.columns)
        cols.update(extra)
        return Panel(self.dates, cols, self.frequency, self.allow_gaps)

    def take(self, mask_or_index) -> "Panel":
        idx = np.asarray(mask_or_index)
        return Panel(self.dates[idx], {k: v[idx] for k, v in self.columns.items()}, self.frequency, True)

    def slice(self, start=None, end=None) -> "Panel":
        mask = np.ones(len(self), bool)
        if start is not None:
            mask &= self.dates >= np.datetime64(start, "D")
        if end is not None:
            mask &= self.dates <= np.datetime64(end, "D")
        return Panel(self.dates[mask], {k: v[mask] for k, v in self.columns.items()},
                     self.frequency, self.allow_gaps)


@dataclass(frozen=True)
class MarketSnapshot:
    """One date's index level, futures curve, discount curve and trailing dividend."""

    date: np.datetime64
    index_level: float
    futures: tuple[tuple[float, float], ...]
    zcb: tuple[tuple[float, float], ...]
    trailing_dividend: float

    def __post_init__(self):
        object.__setattr__(self, "date", np.datetime64(self.date, "D"))
        fut = tuple((float(m), float(p)) for m, p in self.futures)
        zcb = tuple((float(m), float(p)) for m, p in self.zcb)
        object.__setattr__(self, "futures", fut)
        object.__setattr__(self, "zcb", zcb)
        where = f"snapshot {self.date}"
        if not self.index_level > 0:
            raise ValidationError(f"{where}: index level must be positive")
        if not self.trailing_dividend > 0:
            raise ValidationError(f"{where}: trailing dividend must be positive")
        for label, curve in (("futures", fut), ("zcb", zcb)):
            mats = [m for m, _ in curve]
            if any(m <= 0 for m in mats):
                raise ValidationError(f"{where}: {label} maturities must be positive")
            if any(b <= a for a, b in zip(mats, mats[1:])):
                raise ValidationError(f"{where}: {label} maturities must be strictly increasing")
            if any(not p > 0 for _, p in curve):
                raise ValidationError(f"{where}: non-positive {label} price")
        if any(p > 1.0 for _, p in zcb):
            raise ValidationError(f"{where}: zero-coupon price above 1")


# ---------------------------------------------------------------------------
# CSV ingestion

def _parse_date(s: str, line: int) -> np.datetime64:
    s = s.strip()
    if len(s) != 10 or s[4] != "-" or s[7] != "-":
        raise ParseError(f"bad ISO date {s!r}", line)
    try:
        return np.datetime64(s, "D")
    except ValueError:
        raise ParseError(f"bad ISO date {s!r}", line) from None


def _parse_float(s: str, line: int, col: str) -> float:
    s = s.strip()
    if s == "":
        return math.nan
    try:
        x = float(s)
    except ValueError:
        raise ParseError(f"column {col}: not a number {s!r}", line) from None
    if not math.isfinite(x):
        raise ParseError(f"column {col}: non-finite value {s!r}", line)
    return x


def _read_rows(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError("empty file", 1) from None
        rows = []
        for i, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", i)
            rows.append((i, row))
    return header, rows


def _numeric_table(header, rows, names):
    idx = [header.index(n) for n in names]
    lines = np.array([ln for ln, _ in rows], dtype=np.int64)
    dates = np.array([_parse_date(r[0], ln) for ln, r in rows], dtype="datetime64[D]")
    vals = np.array([[_parse_float(r[j], ln, header[j]) for j in idx] for ln, r in rows], dtype=float)
    vals = vals.reshape(len(rows), len(idx))
    order = np.argsort(dates, kind="stable")
    dates, vals, lines = dates[order], vals[order], lines[order]
    dup = np.flatnonzero(np.diff(dates.astype(np.int64)) == 0)
    if dup.size:
        raise ValidationError(f"line {lines[dup[0] + 1]}: duplicate date {dates[dup[0] + 1]}")
    return dates, vals, lines


def _trim_incomplete(dates, vals, lines):
    ok = np.all(np.isfinite(vals), axis=1)
    if not ok.any():
        return dates[:0], vals[:0]
    first, last = np.flatnonzero(ok)[[0, -1]]
    inner = ok[first:last + 1]
    if not inner.all():
        bad = first + int(np.argmin(inner))
        raise ValidationError(f"line {lines[bad]}: missing value inside the series")
    return dates[first:last + 1], vals[first:last + 1]


def _maturity_columns(header, prefix):
    out = {}
    for h in header:
        if h.startswith(prefix):
            try:
                m = float(h[len(prefix):])
            except ValueError:
                raise SchemaError(f"bad maturity column {h!r}", 1) from None
            out[m] = h
    return out


def load_csv(path, schema: str, frequency: str | None = None, allow_gaps: bool = False):
    """Read a CSV file into validated containers.

    Parameters
    ----------
    path : str or Path
    schema : {"series", "panel", "snapshot_panel", "forecast_panel"}
        ``series`` returns a :class:`DatedSeries`; ``snapshot_panel`` a list of
        :class:`MarketSnapshot`; the others a :class:`Panel`.
    frequency : str, optional
        Grid to validate against; inferred from the dates when omitted.
    allow_gaps : bool
        Accept missing periods (e.g. output written under a skip policy).
    """
    if schema not in SCHEMAS:
        raise ValidationError(f"unknown schema {schema!r}")
    header, rows = _read_rows(path)
    if not header or header[0] != "date":
        raise SchemaError("first column must be 'date'", 1)

    if schema == "snapshot_panel":
        return _load_snapshots(header, rows)

    if schema == "series":
        if header != ["date", "value"]:
            raise SchemaError("series header must be 'date,value'", 1)
        names = ["value"]
    elif schema == "forecast_panel":
        missing = [c for c in FORECAST_COLUMNS if c not in header]
        if missing or len(header) != 5:
            raise SchemaError(f"forecast panel header must be 'date,e1,e2,e3,ltg' (missing {missing})", 1)
        names = list(FORECAST_COLUMNS)
    else:
        names = header[1:]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate column names", 1)
    dates, vals, lines = _numeric_table(header, rows, names)
    dates, vals = _trim_incomplete(dates, vals, lines)
    freq = frequency or infer_frequency(dates)
    if schema == "series":
        return DatedSeries(dates, vals[:, 0], freq, allow_gaps=allow_gaps)
    return Panel(dates, {n: vals[:, j] for j, n in enumerate(names)}, freq, allow_gaps)


def _load_snapshots(header, rows):
    for col in ("index", "dividend_ttm"):
        if col not in header:
            raise SchemaError(f"missing column {col!r}", 1)
    fcols = _maturity_columns(header, "F_")
    zcols = _maturity_columns(header, "Z_")
    if not fcols:
        raise SchemaError("no futures columns F_<maturity>", 1)
    for m, name in fcols.items():
        if m not in zcols:
            raise SchemaError(f"missing column Z_{name[2:]}", 1)
    for m, name in zcols.items():
        if m not in fcols:
            raise SchemaError(f"missing column F_{name[2:]}", 1)
    known = {"date", "index", "dividend_ttm", *fcols.values(), *zcols.values()}
    extra = [h for h in header if h not in known]
    if extra:
        raise SchemaError(f"unexpected columns {extra}", 1)
    mats = sorted(fcols)
    names = ["index", "dividend_ttm"] + [fcols[m] for m in mats] + [zcols[m] for m in mats]
    dates, vals, lines = _numeric_table(header, rows, names)
    k = len(mats)
    out = []
    for d, v, ln in zip(dates, vals, lines):
        if math.isnan(v[0]) or math.isnan(v[1]):
            raise ParseError("missing index or dividend", int(ln))
        fut = [(m, p) for m, p in zip(mats, v[2:2 + k]) if not math.isnan(p)]
        zcb = [(m, p) for m, p in zip(mats, v[2 + k:]) if not math.isnan(p)]
        try:
            out.append(MarketSnapshot(d, v[0], fut, zcb, v[1]))
        except ValidationError as exc:
            raise ValidationError(f"line {ln}: {exc}") from None
    return out


def write_csv(obj, path) -> None:
    """Write a series, panel or snapshot list; floats at 12 significant digits."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    if isinstance(obj, DatedSeries):
        header = ["date", "value"]
        body = [[str(d), format_float(v)] for d, v in zip(obj.dates, obj.values)]
    elif isinstance(obj, Panel):
        header = ["date"] + obj.names
        cols = [obj.columns[n] for n in obj.names]
        body = [[str(d)] + [format_float(c[i]) for c in cols] for i, d in enumerate(obj.dates)]
    else:
        snaps = list(obj)
        if not all(isinstance(s, MarketSnapshot) for s in snaps):
            raise ValidationError("write_csv expects a DatedSeries, Panel or list of MarketSnapshot")
        mats = sorted({m for s in snaps for m, _ in s.futures} | {m for s in snaps for m, _ in s.zcb})
        labels = [format_maturity(m) for m in mats]
        header = (["date", "index", "dividend_ttm"] + [f"F_{x}" for x in labels]
                  + [f"Z_{x}" for x in labels])
        body = []
        for s in snaps:
            f, z = dict(s.futures), dict(s.zcb)
            body.append([str(s.date), format_float(s.index_level), format_float(s.trailing_dividend)]
                        + [format_float(f.get(m, math.nan)) for m in mats]
                        + [format_float(z.get(m, math.nan)) for m in mats])
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(body)


# ---------------------------------------------------------------------------
# alignment and return conventions

def align(a: DatedSeries, b: DatedSeries) -> Panel:
    """Panel over the common dates of two series (possibly empty)."""
    if a.frequency != b.frequency:
        raise ValidationError(f"frequency mismatch: {a.frequency} vs {b.frequency}")
    common, ia, ib = np.intersect1d(a.dates, b.dates, assume_unique=True, return_indices=True)
    na, nb = a.name, b.name
    if na == nb:
        nb = nb + "_2"
    gaps = a.allow_gaps or b.allow_gaps
    return Panel(common, {na: a.values[ia], nb: b.values[ib]}, a.frequency, gaps)


def _require_monthly(s: DatedSeries, what: str):
    if s.frequency != "monthly":
        raise ValidationError(f"{what} must be monthly, got {s.frequency}")


def annual_log_return(prices: DatedSeries, dividends: DatedSeries) -> DatedSeries:
    """Overlapping twelve-month log total returns.

    At month t the value is ``ln((P[t+12] + sum(d[t+1..t+12])) / P[t])``:
    dividends paid within the year are added to the terminal price without
    reinvestment.
    """
    _require_monthly(prices, "prices")
    _require_monthly(dividends, "dividends")
    if not np.array_equal(prices.dates, dividends.dates):
        raise ValidationError("prices and dividends must share dates")
    n = len(prices)
    if n < 13:
        raise ValidationError(f"need at least 13 monthly observations, got {n}")
    p = prices.values
    c = np.concatenate([[0.0], np.cumsum(dividends.values)])
    divsum = c[13:] - c[1:n - 11]
    r = np.log((p[12:] + divsum) / p[:-12])
    return DatedSeries(prices.dates[:-12], r, "monthly", "annual_log_return")


def trailing_dividend(dividends: DatedSeries) -> DatedSeries:
    """Sum of the current and eleven prior monthly dividends."""
    _require_monthly(dividends, "dividends")
    if len(dividends) < 12:
        raise ValidationError("need at least 12 monthly dividends")
    c = np.concatenate([[0.0], np.cumsum(dividends.values)])
    return DatedSeries(dividends.dates[11:], c[12:] - c[:-12], "monthly", "dividend_ttm")


def month_ends(start: str, n: int) -> np.ndarray:
    """``n`` consecutive calendar month-ends beginning with the month of ``start``."""
    m0 = np.datetime64(start, "M")
    months = m0 + np.arange(n + 1)
    return (months[1:].astype("datetime64[D]") - np.timedelta64(1, "D"))


def year_ends(start_year: int, n: int) -> np.ndarray:
    years = np.datetime64(str(start_year), "Y") + np.arange(1, n + 1)
    return years.astype("datetime64[D]") - np.timedelta64(1, "D")
