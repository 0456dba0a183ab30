import logging
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from durlab.data import (DatedSeries, MarketSnapshot, Panel, align, annual_log_return, format_float,
                         infer_frequency, load_csv, month_ends, trailing_dividend, write_csv, year_ends)
from durlab.errors import ParseError, SchemaError, ValidationError


def _monthly(n, start="2000-01", name="value", values=None):
    v = np.arange(n, dtype=float) if values is None else values
    return DatedSeries(month_ends(start, n), v, "monthly", name)


def test_month_ends_are_last_days():
    d = month_ends("2000-01", 3)
    assert [str(x) for x in d] == ["2000-01-31", "2000-02-29", "2000-03-31"]


def test_year_ends():
    assert [str(x) for x in year_ends(1999, 2)] == ["1999-12-31", "2000-12-31"]


def test_series_is_read_only():
    s = _monthly(5)
    with pytest.raises(ValueError):
        s.values[0] = 1.0


def test_series_rejects_gap_unless_allowed():
    d = month_ends("2000-01", 5)
    d = np.delete(d, 2)
    with pytest.raises(ValidationError, match="not on the monthly grid"):
        DatedSeries(d, np.zeros(4), "monthly")
    assert len(DatedSeries(d, np.zeros(4), "monthly", allow_gaps=True)) == 4


def test_series_rejects_duplicate_and_nan():
    d = month_ends("2000-01", 3)
    with pytest.raises(ValidationError, match="duplicate"):
        DatedSeries(np.array([d[0], d[0], d[1]]), np.zeros(3))
    with pytest.raises(ValidationError, match="non-finite"):
        DatedSeries(d, [1.0, math.nan, 2.0])


def test_weekly_grid():
    d = np.datetime64("2020-01-03") + np.arange(0, 70, 7)
    s = DatedSeries(d, np.ones(10), "weekly")
    assert infer_frequency(s.dates) == "weekly"


def test_infer_frequency():
    assert infer_frequency(month_ends("2000-01", 4)) == "monthly"
    assert infer_frequency(year_ends(1990, 4)) == "annual"


def test_panel_access_and_slice():
    p = Panel(month_ends("2000-01", 6), {"a": np.arange(6.0), "b": np.ones(6)})
    assert p.names == ["a", "b"]
    assert p["a"].name == "a"
    assert p.matrix(["b", "a"]).shape == (6, 2)
    assert len(p.slice("2000-03-01", "2000-04-30")) == 2
    with pytest.raises(ValidationError, match="zz"):
        p["zz"]


def test_csv_roundtrip_panel(tmp_path):
    p = Panel(month_ends("2000-01", 4), {"x": [0.1, 0.2, 1 / 3, 1e-9], "y": [1.0, 2.0, 3.0, 4.0]})
    write_csv(p, tmp_path / "p.csv")
    q = load_csv(tmp_path / "p.csv", "panel")
    assert q.names == ["x", "y"]
    np.testing.assert_allclose(q.matrix(["x", "y"]), p.matrix(["x", "y"]), rtol=1e-11)
    assert b"\r" not in (tmp_path / "p.csv").read_bytes()


def test_csv_series_roundtrip(tmp_path):
    s = _monthly(5)
    write_csv(s, tmp_path / "s.csv")
    t = load_csv(tmp_path / "s.csv", "series")
    np.testing.assert_array_equal(t.values, s.values)
    np.testing.assert_array_equal(t.dates, s.dates)


def test_duplicate_date_reports_line(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("date,value\n2000-01-31,1\n2000-02-29,2\n2000-02-29,3\n")
    with pytest.raises(ValidationError, match="line 4"):
        load_csv(f, "series")


def test_trailing_blank_rows_are_trimmed_but_interior_gap_fails(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("date,value\n2000-01-31,\n2000-02-29,2\n2000-03-31,3\n2000-04-30,\n")
    s = load_csv(f, "series")
    assert len(s) == 2
    f.write_text("date,value\n2000-01-31,1\n2000-02-29,\n2000-03-31,3\n")
    with pytest.raises(ValidationError, match="line 3"):
        load_csv(f, "series")


def test_bad_number_is_parse_error(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("date,value\n2000-01-31,abc\n")
    with pytest.raises(ParseError):
        load_csv(f, "series")


def test_schema_errors(tmp_path):
    f = tmp_path / "d.csv"
    f.write_text("when,value\n2000-01-31,1\n")
    with pytest.raises(SchemaError):
        load_csv(f, "series")
    f.write_text("date,e1,e2,e3\n2000-01-31,1,2,3\n")
    with pytest.raises(SchemaError, match="ltg"):
        load_csv(f, "forecast_panel")
    with pytest.raises(ValidationError):
        load_csv(f, "nonsense")


def _snap(date="2000-01-31", P=100.0, D=2.0):
    return MarketSnapshot(np.datetime64(date), P, [(0.5, 99.0), (1.0, 98.0)], [(0.5, 0.99), (1.0, 0.98)], D)


def test_snapshot_roundtrip(tmp_path):
    snaps = [_snap("2000-01-31"), _snap("2000-02-29", 101.0)]
    write_csv(snaps, tmp_path / "s.csv")
    back = load_csv(tmp_path / "s.csv", "snapshot_panel")
    assert len(back) == 2
    assert back[1].index_level == 101.0
    assert dict(back[0].futures)[1.0] == 98.0


def test_snapshot_missing_discount_column(tmp_path):
    f = tmp_path / "s.csv"
    f.write_text("date,index,dividend_ttm,F_0.5,F_1,Z_0.5\n2000-01-31,100,2,99,98,0.99\n")
    with pytest.raises(SchemaError, match="missing column Z_1"):
        load_csv(f, "snapshot_panel")


def test_snapshot_validation():
    with pytest.raises(ValidationError):
        MarketSnapshot(np.datetime64("2000-01-31"), -1.0, [(1.0, 1.0)], [(1.0, 0.9)], 1.0)
    with pytest.raises(ValidationError):
        MarketSnapshot(np.datetime64("2000-01-31"), 100.0, [(1.0, 1.0)], [(1.0, 1.5)], 1.0)


def test_align_intersection_and_name_clash():
    a = _monthly(6)
    b = _monthly(6, "2000-03")
    p = align(a, b)
    assert len(p) == 4
    assert p.names == ["value", "value_2"]
    np.testing.assert_array_equal(p["value"].values, [2, 3, 4, 5])
    np.testing.assert_array_equal(p["value_2"].values, [0, 1, 2, 3])


def test_align_frequency_mismatch():
    a = _monthly(3)
    b = DatedSeries(year_ends(2000, 3), np.zeros(3), "annual")
    with pytest.raises(ValidationError):
        align(a, b)


def _annual_return_loop(P, d):
    # direct summation, one window at a time
    out = []
    for t in range(len(P) - 12):
        out.append(math.log((P[t + 12] + sum(d[t + 1:t + 13])) / P[t]))
    return np.array(out)


@given(st.integers(0, 10_000))
def test_annual_log_return_matches_loop(seed):
    rng = np.random.default_rng(seed)
    n = 30
    P = 100 * np.exp(np.cumsum(rng.normal(0, 0.04, n)))
    d = rng.uniform(0.1, 0.3, n)
    r = annual_log_return(_monthly(n, values=P), _monthly(n, values=d))
    assert len(r) == n - 12
    np.testing.assert_allclose(r.values, _annual_return_loop(P, d), rtol=1e-12, atol=1e-14)


def test_annual_log_return_constant_growth():
    # price grows 1% a month, no dividends: twelve-month return is 12 * ln(1.01)
    P = 1.01 ** np.arange(20)
    r = annual_log_return(_monthly(20, values=P), _monthly(20, values=np.zeros(20)))
    np.testing.assert_allclose(r.values, 12 * math.log(1.01), rtol=1e-12)


def test_annual_log_return_needs_13():
    with pytest.raises(ValidationError):
        annual_log_return(_monthly(12), _monthly(12))


def test_trailing_dividend():
    d = _monthly(14, values=np.ones(14))
    t = trailing_dividend(d)
    assert len(t) == 3
    np.testing.assert_allclose(t.values, 12.0)


def test_format_float():
    assert format_float(math.nan) == ""
    assert format_float(0.1) == "0.1"
    assert float(format_float(1 / 3)) == pytest.approx(1 / 3, rel=1e-11)
