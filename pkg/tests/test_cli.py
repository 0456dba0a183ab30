import filecmp
import math
import subprocess
import sys

import numpy as np
import pytest

from durlab.cli import SCAN_SETS, main
from durlab.data import DatedSeries, Panel, load_csv, write_csv, year_ends
from durlab.kvfile import read_kv
from durlab.latent import simulate_dividend_growth


@pytest.fixture(scope="module")
def sim_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sim")
    assert main(["simulate", "--seed", "11", "--T", "240", "--out", str(out)]) == 0
    return out


def _same_tree(a, b):
    cmp = filecmp.dircmp(a, b)
    if cmp.left_only or cmp.right_only or cmp.funny_files:
        return False
    _, mismatch, errors = filecmp.cmpfiles(a, b, cmp.common_files, shallow=False)
    if mismatch or errors:
        return False
    return all(_same_tree(a / d, b / d) for d in cmp.common_dirs)


# ---------------------------------------------------------------------------
# simulate

def test_simulate_files_and_rows(sim_dir):
    for name in ("path.csv", "snapshots.csv", "analyst.csv", "dividend_growth.csv", "params.kv",
                 "coefficients.csv", "metadata.kv"):
        assert (sim_dir / name).exists(), name
    snaps = load_csv(sim_dir / "snapshots.csv", "snapshot_panel")
    assert len(snaps) == 240
    meta = read_kv(sim_dir / "metadata.kv")
    assert meta["seed"] == "11" and meta["command"] == "simulate"
    assert len(meta["config_hash"]) == 64


def test_simulate_deterministic(tmp_path, sim_dir):
    assert main(["simulate", "--seed", "11", "--T", "240", "--out", str(tmp_path)]) == 0
    assert _same_tree(sim_dir, tmp_path)


def test_simulate_seed_from_env(tmp_path, monkeypatch):
    monkeypatch.setenv("DURLAB_SEED", "11")
    assert main(["simulate", "--T", "40", "--out", str(tmp_path)]) == 0
    assert read_kv(tmp_path / "metadata.kv")["seed"] == "11"


def test_simulate_records_generated_seed(tmp_path, monkeypatch):
    monkeypatch.delenv("DURLAB_SEED", raising=False)
    assert main(["simulate", "--T", "40", "--out", str(tmp_path)]) == 0
    assert int(read_kv(tmp_path / "metadata.kv")["seed"]) >= 0


def test_simulate_bad_rho_exits_2(tmp_path, capsys):
    assert main(["simulate", "--seed", "1", "--rho-z", "1.5", "--out", str(tmp_path)]) == 2
    assert "rho_z" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# strips

def test_strips_round_trip(tmp_path, sim_dir):
    assert main(["strips", "--snapshots", str(sim_dir / "snapshots.csv"), "--out", str(tmp_path)]) == 0
    val = load_csv(tmp_path / "valuation.csv", "panel")
    path = load_csv(sim_dir / "path.csv", "panel")
    n = len(path)                  # the last path row lacks forward returns and is trimmed
    assert len(val) == 240 and np.array_equal(val.dates[:n], path.dates)
    for col in ("dr", "pd"):
        np.testing.assert_allclose(val[col].values[:n], path[col].values, rtol=1e-8)
    derived = read_kv(tmp_path / "derived.kv")
    assert derived and (tmp_path / "duration_stats.csv").exists()


def _corrupt_row(src, dst, row):
    lines = src.read_text().splitlines()
    head = lines[0].split(",")
    cells = lines[row].split(",")
    cells[head.index("F_1")] = "1e9"
    lines[row] = ",".join(cells)
    dst.write_text("\n".join(lines) + "\n")


def test_strips_skip_policy(tmp_path, sim_dir, caplog):
    bad = tmp_path / "snaps.csv"
    _corrupt_row(sim_dir / "snapshots.csv", bad, 5)
    with caplog.at_level("WARNING"):
        code = main(["strips", "--snapshots", str(bad), "--policy", "skip", "--out", str(tmp_path / "o")])
    assert code == 0
    val = load_csv(tmp_path / "o" / "valuation.csv", "panel", "monthly", allow_gaps=True)
    assert len(val) == 239
    assert sum("skip" in r.getMessage().lower() for r in caplog.records) == 1


def test_strips_fail_fast_names_date(tmp_path, sim_dir, capsys):
    bad = tmp_path / "snaps.csv"
    _corrupt_row(sim_dir / "snapshots.csv", bad, 5)
    assert main(["strips", "--snapshots", str(bad), "--out", str(tmp_path / "o")]) == 3
    date = (sim_dir / "snapshots.csv").read_text().splitlines()[5].split(",")[0]
    assert date in capsys.readouterr().err


def test_strips_missing_z1(tmp_path, sim_dir, capsys):
    lines = (sim_dir / "snapshots.csv").read_text().splitlines()
    head = lines[0].split(",")
    j = head.index("Z_1")
    cut = [",".join(c for k, c in enumerate(l.split(",")) if k != j) for l in lines]
    bad = tmp_path / "snaps.csv"
    bad.write_text("\n".join(cut) + "\n")
    assert main(["strips", "--snapshots", str(bad), "--out", str(tmp_path / "o")]) == 3
    assert "Z_1" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# forecast

@pytest.fixture(scope="module")
def panel_csv(sim_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("panel")
    path = load_csv(sim_dir / "path.csv", "panel")
    cols = {c: path[c].values for c in ("dr", "pd", "s05", "s1plus", "er", "r")}
    f = out / "panel.csv"
    write_csv(Panel(path.dates, cols, "monthly"), f)
    return f


def test_forecast_report_fields(tmp_path, panel_csv, capsys):
    code = main(["forecast", "--panel", str(panel_csv), "--target", "r", "--predictors", "dr",
                 "--oos-start", "1998-01-31", "--out", str(tmp_path)])
    assert code == 0
    rep = read_kv(tmp_path / "report_1.kv")
    for key in ("beta_dr", "t_nw_dr", "t_hodrick_dr", "beta_stambaugh", "r2", "r2_oos", "enc_stat",
                "enc_pvalue_range", "cw_stat", "cw_pvalue", "n_obs"):
        assert key in rep, key
    assert (tmp_path / "fitted_1.csv").exists() and (tmp_path / "oos_1.csv").exists()
    assert "r ~ dr" in capsys.readouterr().out


def test_forecast_scan_has_13_rows(tmp_path, panel_csv):
    assert len(SCAN_SETS) == 13
    assert main(["forecast", "--panel", str(panel_csv), "--target", "er", "--scan", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "scan.csv").read_text().splitlines()
    assert len(lines) == 1 + 13


def test_forecast_bootstrap_reproducible(tmp_path, panel_csv):
    args = ["forecast", "--panel", str(panel_csv), "--target", "r", "--predictors", "dr",
            "--bootstrap", "500", "--seed", "5"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    a, b = read_kv(tmp_path / "a" / "report_1.kv"), read_kv(tmp_path / "b" / "report_1.kv")
    assert a["boot_lo"] == b["boot_lo"] and a["boot_hi"] == b["boot_hi"]
    assert float(a["boot_lo"]) <= float(a["boot_hi"])


def test_forecast_missing_column_exits_3(tmp_path, panel_csv):
    assert main(["forecast", "--panel", str(panel_csv), "--target", "nope", "--out", str(tmp_path)]) == 3
    assert main(["forecast", "--panel", str(panel_csv), "--target", "r", "--predictors", "zz",
                 "--out", str(tmp_path)]) == 3


# ---------------------------------------------------------------------------
# estimate

def test_estimate_kalman_schema(tmp_path):
    f = tmp_path / "dg.csv"
    dg = simulate_dividend_growth(60, 0.06, 0.26, 0.02, 0.1, seed=1)
    write_csv(DatedSeries(year_ends(1950, 60), dg, "annual"), f)
    assert main(["estimate", "--input", str(f), "--method", "kalman", "--seed", "1", "--n-starts", "3",
                 "--out", str(tmp_path / "o")]) == 0
    head = (tmp_path / "o" / "fits.csv").read_text().splitlines()[0].split(",")
    for col in ("rho_z", "loglik", "aic", "bic"):
        assert col in head
    fit = read_kv(tmp_path / "o" / "fit.kv")
    assert math.isfinite(float(fit["rho_z"]))


@pytest.mark.parametrize("method", ["kalman-restricted", "ar1", "ma1"])
def test_estimate_other_growth_models(tmp_path, method):
    f = tmp_path / "dg.csv"
    write_csv(DatedSeries(year_ends(1950, 40), simulate_dividend_growth(40, 0.06, 0.2, 0.05, 0.05, seed=2),
                          "annual"), f)
    assert main(["estimate", "--input", str(f), "--method", method, "--seed", "1", "--n-starts", "2",
                 "--out", str(tmp_path / "o")]) == 0
    assert "loglik" in read_kv(tmp_path / "o" / "fit.kv")


def test_estimate_system_and_ltg(tmp_path, sim_dir):
    for method in ("system-Y1Y3", "system-Y1Y2", "ltg"):
        out = tmp_path / method
        assert main(["estimate", "--input", str(sim_dir / "analyst.csv"), "--method", method,
                     "--out", str(out)]) == 0
        assert read_kv(out / "fit.kv")["method"] == method


def test_estimate_rolling_weekly(tmp_path):
    n = 400
    rng = np.random.default_rng(0)
    dates = np.datetime64("2000-01-07") + 7 * np.arange(n)
    z = 0.02 * rng.standard_normal(n)
    cols = {"e1": 0.05 + z + 0.002 * rng.standard_normal(n), "e2": 0.05 + 0.002 * rng.standard_normal(n),
            "e3": 0.05 + 0.002 * rng.standard_normal(n), "ltg": 0.05 + 0.002 * rng.standard_normal(n)}
    f = tmp_path / "weekly.csv"
    write_csv(Panel(dates, cols, "weekly"), f)
    assert main(["estimate", "--input", str(f), "--method", "rolling", "--window", "156",
                 "--out", str(tmp_path / "o")]) == 0
    s = load_csv(tmp_path / "o" / "rhoz.csv", "series", "weekly")
    assert len(s) == n - 155


def test_estimate_unknown_method_exits_2(tmp_path, sim_dir):
    assert main(["estimate", "--input", str(sim_dir / "analyst.csv"), "--method", "garch",
                 "--out", str(tmp_path)]) == 2


def test_estimate_failure_exits_4(tmp_path):
    f = tmp_path / "flat.csv"
    write_csv(DatedSeries(year_ends(1950, 30), np.full(30, 0.05), "annual"), f)
    assert main(["estimate", "--input", str(f), "--method", "kalman", "--seed", "1",
                 "--out", str(tmp_path / "o")]) == 4


# ---------------------------------------------------------------------------
# backtest

def test_backtest_formula_path(capsys):
    assert main(["backtest", "--s0", "0.37", "--r2", "0.146"]) == 0
    assert capsys.readouterr().out.strip() == "0.58"


def test_backtest_files(tmp_path):
    rng = np.random.default_rng(1)
    n = 200
    dates = np.array([np.datetime64("2000-01-31")]).astype("datetime64[M]") + np.arange(n)
    dates = (dates + 1).astype("datetime64[D]") - 1
    x = 0.01 * rng.standard_normal(n)
    write_csv(DatedSeries(dates, 0.005 + x, "monthly"), tmp_path / "f.csv")
    write_csv(DatedSeries(dates, 0.005 + x + 0.04 * rng.standard_normal(n), "monthly"), tmp_path / "r.csv")
    assert main(["backtest", "--forecasts", str(tmp_path / "f.csv"), "--realized", str(tmp_path / "r.csv"),
                 "--out", str(tmp_path / "o")]) == 0
    summary = read_kv(tmp_path / "o" / "summary.kv")
    assert {"s0", "s1", "improvement_pct"} <= set(summary)
    assert (tmp_path / "o" / "weights.csv").read_text().startswith("date,weight,return")


def test_backtest_empty_and_misaligned(tmp_path):
    (tmp_path / "empty.csv").write_text("date,value\n")
    rng = np.random.default_rng(2)
    dates = (np.datetime64("2000-01", "M") + np.arange(1, 51)).astype("datetime64[D]") - 1
    write_csv(DatedSeries(dates, rng.normal(size=50), "monthly"), tmp_path / "r.csv")
    write_csv(DatedSeries(dates[1:], rng.normal(size=49), "monthly"), tmp_path / "f.csv")
    assert main(["backtest", "--forecasts", str(tmp_path / "empty.csv"), "--realized", str(tmp_path / "r.csv"),
                 "--out", str(tmp_path / "o")]) == 3
    assert main(["backtest", "--forecasts", str(tmp_path / "f.csv"), "--realized", str(tmp_path / "r.csv"),
                 "--out", str(tmp_path / "o")]) == 3
    assert main(["backtest", "--s0", "0.3"]) == 2


# ---------------------------------------------------------------------------
# config file and entry point

def test_config_file_supplies_defaults(tmp_path):
    cfg = tmp_path / "run.kv"
    cfg.write_text("T = 50\nrho_z = 0.2\nsigma_z = 0, 0.02, 0\n")
    assert main(["simulate", "--config", str(cfg), "--seed", "2", "--out", str(tmp_path / "o")]) == 0
    meta = read_kv(tmp_path / "o" / "metadata.kv")
    assert meta["arg.T"] == "50"
    params = read_kv(tmp_path / "o" / "params.kv")
    assert float(params["rho_z"]) == 0.2
    assert len(load_csv(tmp_path / "o" / "snapshots.csv", "snapshot_panel")) == 50


def test_config_unknown_key_exits_2(tmp_path):
    cfg = tmp_path / "run.kv"
    cfg.write_text("bogus = 1\n")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2


def test_config_hash_tracks_arguments(tmp_path):
    main(["simulate", "--seed", "1", "--T", "30", "--out", str(tmp_path / "a")])
    main(["simulate", "--seed", "1", "--T", "30", "--out", str(tmp_path / "b")])
    main(["simulate", "--seed", "1", "--T", "31", "--out", str(tmp_path / "c")])
    h = [read_kv(tmp_path / d / "metadata.kv")["config_hash"] for d in "abc"]
    assert h[0] == h[1] != h[2]


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "durlab", "backtest", "--s0", "0.37", "--r2", "0.146"],
                         capture_output=True, text=True)
    assert out.returncode == 0 and out.stdout.strip() == "0.58"


def test_demo_summary_fields(tmp_path):
    assert main(["demo", "--seed", "7", "--bootstrap", "200", "--out", str(tmp_path)]) == 0
    summary = read_kv(tmp_path / "backtest" / "summary.kv")
    assert {"s0", "s1", "improvement_pct"} <= set(summary)
    for sub in ("simulate", "strips", "forecast", "estimate", "backtest"):
        assert (tmp_path / sub).is_dir()
