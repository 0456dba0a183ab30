"""Command-line entry point.

Subcommands: simulate, strips, forecast, estimate, backtest, demo.  Every
command writes its files under ``--out`` together with ``metadata.kv``
recording the resolved arguments, the seed and a hash of the configuration.

Exit codes: 0 success, 2 configuration or usage, 3 data or validation,
4 estimation or numerical failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import math
import os
import secrets
import sys
from pathlib import Path

import numpy as np

from . import __version__, _kernels
from .affine import ModelParams2D, solve_strip_coefficients
from .data import DatedSeries, Panel, annual_log_return, load_csv, write_csv
from .errors import (DegeneracyError, DurlabError, EstimationError, NumericalError, ParameterError,
                     ParseError, ValidationError)
from .kvfile import read_kv, to_float, to_vector, write_kv
from .latent import (estimate_rhoz_ltg, estimate_rhoz_system, fit_arma, fit_state_space,
                     rolling_rhoz)
from .presets import default_params
from .regression import (RegressionSpec, bootstrap_r2_ci, ols, oos_evaluate, predictor_scan,
                         run_regression)
from .simulate import RNG_ALGORITHM, simulate, simulate_analyst_forecasts, synthesize_snapshots
from .strips import ValuationSeries, duration_stats, valuation_series
from .tables import Table
from .timing import backtest, timing_sharpe

log = logging.getLogger("durlab")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ESTIMATION = 0, 2, 3, 4

# the thirteen predictor subsets compared in the spanning scan
SCAN_SETS = (
    ("dr", "pd"), ("dr",), ("pd",), ("dr", "s05"), ("pd", "s05"), ("s05", "s1plus"),
    ("dr", "s1plus"), ("pd", "s1plus"), ("dr", "pd", "s05"), ("dr", "pd", "s1plus"),
    ("dr", "s05", "s1plus"), ("pd", "s05", "s1plus"), ("dr", "pd", "s05", "s1plus"),
)

PARAM_FIELDS = tuple(ModelParams2D.__dataclass_fields__)
VECTOR_FIELDS = ("sigma_z", "sigma_y", "sigma_D", "sigma_lambda")
METHODS = ("kalman", "kalman-restricted", "ar1", "ma1", "system-Y1Y3", "system-Y1Y2", "ltg", "rolling")
UNHASHED = {"out", "log_level", "jobs", "config", "func", "command"}


class UsageError(DurlabError):
    pass


# ---------------------------------------------------------------------------
# helpers

def _floats(text: str) -> tuple[float, ...]:
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return int(args.seed)
    env = os.environ.get("DURLAB_SEED")
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"DURLAB_SEED must be an integer, got {env!r}") from None
    seed = secrets.randbits(32)
    log.info("no seed given; generated %d", seed)
    return seed


def _config_hash(items: dict) -> str:
    payload = json.dumps({k: str(v) for k, v in sorted(items.items())}, sort_keys=True)
    return hashlib.sha256(payload.encode()).hexdigest()


def _resolved(args) -> dict:
    return {k: v for k, v in vars(args).items() if k not in UNHASHED and v is not None}


def _write_metadata(out: Path, args, seed=None, extra=None) -> None:
    items = {"command": args.command, "version": __version__, "backend": _kernels.BACKEND}
    if seed is not None:
        items.update(seed=seed, rng=RNG_ALGORITHM)
    res = _resolved(args)
    if seed is not None:
        res["seed"] = seed
    items["config_hash"] = _config_hash(res)
    for k, v in sorted(res.items()):
        if k == "seed":
            continue
        items[f"arg.{k}"] = ",".join(map(str, v)) if isinstance(v, (list, tuple)) else str(v)
    items.update(extra or {})
    write_kv(items, out / "metadata.kv")


def _outdir(args, sub: str | None = None) -> Path:
    out = Path(args.out)
    if sub:
        out = out / sub
    out.mkdir(parents=True, exist_ok=True)
    return out


# ---------------------------------------------------------------------------
# simulate

def _build_params(args) -> ModelParams2D:
    if args.params:
        kv = read_kv(args.params)
        kv.pop("model", None)
        base = ModelParams2D.from_kv(kv)
    else:
        base = default_params()
    over = dict(args.param_overrides or {})
    for name in ("rho_z", "rho_y", "g_bar", "lambda_bar", "r_f"):
        v = getattr(args, name, None)
        if v is not None:
            over[name] = float(v)
    if not over:
        return base
    kw = {k: getattr(base, k) for k in PARAM_FIELDS}
    kw.update(over)
    return ModelParams2D(**kw)


def _simulate_outputs(args, seed: int, out: Path):
    params = _build_params(args)
    path = simulate(params, None, args.T, seed, frequency=args.frequency)
    snaps = synthesize_snapshots(path, params, args.maturities)
    write_csv(path.to_panel(), out / "path.csv")
    write_csv(snaps, out / "snapshots.csv")
    analyst = simulate_analyst_forecasts(path, params, noise_sd=args.analyst_noise, seed=seed + 1,
                                         noise_rho=args.analyst_noise_rho)
    write_csv(analyst, out / "analyst.csv")
    step = 12 if args.frequency == "monthly" else 1
    idx = np.arange(step - 1, path.T, step)
    if len(idx) > 2:
        logD = np.log(path.D[idx])
        freq = "annual"
        write_csv(DatedSeries(path.dates[idx[1:]], np.diff(logD), freq, "dividend_growth"),
                  out / "dividend_growth.csv")
    (out / "params.kv").write_text(params.to_kv(), encoding="utf-8")
    solve_strip_coefficients(params.to_model_params(), 10).to_csv(out / "coefficients.csv")
    _write_metadata(out, args, seed, {f"path.{k}": v for k, v in path.metadata().items()
                                      if k not in ("seed",)})
    return params, path


def cmd_simulate(args) -> int:
    seed = _resolve_seed(args)
    out = _outdir(args)
    _, path = _simulate_outputs(args, seed, out)
    print(f"simulated {path.T} {args.frequency} periods (seed {seed}) -> {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# strips

def _strips_outputs(args, snapshots_path, out: Path) -> ValuationSeries:
    snaps = load_csv(snapshots_path, "snapshot_panel")
    vs = valuation_series(snaps, policy=args.policy, interpolation=args.interpolation)
    write_csv(vs.to_panel(), out / "valuation.csv")
    summary = duration_stats(vs)
    summary.table.to_csv(out / "duration_stats.csv")
    write_kv(summary.derived, out / "derived.kv")
    return vs


def cmd_strips(args) -> int:
    out = _outdir(args)
    vs = _strips_outputs(args, args.snapshots, out)
    _write_metadata(out, args)
    print(f"{len(vs.dr)} valuation dates -> {out / 'valuation.csv'}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# forecast

def _specs(args) -> list[RegressionSpec]:
    sets = args.predictors or ["dr"]
    return [RegressionSpec(args.target, tuple(s.split(",")), horizon_months=args.horizon, lead=args.lead,
                           one_period_target=args.one_period_target) for s in sets]


def _forecast_outputs(args, panel: Panel, out: Path, seed: int | None):
    if args.target not in panel.names:
        raise ValidationError(f"target column {args.target!r} not in panel")
    specs = _specs(args)
    rows, results = [], []
    for i, spec in enumerate(specs, start=1):
        missing = [p for p in spec.predictors if p not in panel.names]
        if missing:
            raise ValidationError(f"predictor columns {missing} not in panel")
        rep = run_regression(panel, spec, nw_lags=args.nw_lags, oos_start=args.oos_start, cw_lags=args.cw_lags)
        items = {"target": spec.target, "predictors": "+".join(spec.predictors), **rep.as_items()}
        if args.bootstrap:
            pt, lo, hi = bootstrap_r2_ci(panel, spec, args.bootstrap, args.block_len, seed, jobs=args.jobs)
            items.update(boot_r2=pt, boot_lo=lo, boot_hi=hi)
        write_kv(items, out / f"report_{i}.kv")
        rows.append(items)
        fit = ols(panel, spec)
        write_csv(Panel(fit.dates, {"realized": fit.y, "fitted": fit.fitted}, panel.frequency,
                        panel.allow_gaps), out / f"fitted_{i}.csv")
        oos = None
        if args.oos_start is not None:
            oos = oos_evaluate(panel, spec, args.oos_start)
            write_csv(Panel(oos.dates, {"actual": oos.actual, "forecast": oos.forecast,
                                        "benchmark": oos.benchmark}, panel.frequency, True),
                      out / f"oos_{i}.csv")
        results.append((spec, rep, oos))
        _print_report(items)
    keys = list(dict.fromkeys(k for r in rows for k in r))
    Table(keys, [[r.get(k, math.nan) for k in keys] for r in rows]).to_csv(out / "reports.csv")
    if args.scan:
        sets = [s for s in SCAN_SETS if all(c in panel.names for c in s)]
        predictor_scan(panel, args.target, sets, lead=args.lead, on_error="record").to_csv(out / "scan.csv")
    return results


def _print_report(items: dict) -> None:
    print(f"{items['target']} ~ {items['predictors']}  (n = {items['n_obs']})")
    for k, v in items.items():
        if k in ("target", "predictors", "n_obs"):
            continue
        print(f"  {k:<22} {v:.4f}" if isinstance(v, float) else f"  {k:<22} {v}")


def cmd_forecast(args) -> int:
    seed = _resolve_seed(args) if args.bootstrap else None
    out = _outdir(args)
    panel = load_csv(args.panel, "panel", args.frequency)
    _forecast_outputs(args, panel, out, seed)
    _write_metadata(out, args, seed)
    return EXIT_OK


# ---------------------------------------------------------------------------
# estimate

KALMAN_COLUMNS = ("model", "corr", "rho_z", "se_rho_z", "g", "se_g", "sigma_d", "se_sigma_d",
                  "sigma_z", "se_sigma_z", "loglik", "aic", "bic", "n", "k")


def _estimate_outputs(args, input_path, out: Path, seed: int) -> dict:
    m = args.method
    if m in ("kalman", "kalman-restricted", "ar1", "ma1"):
        dg = load_csv(input_path, "series", args.frequency).values
        if m.startswith("kalman"):
            fits = fit_state_space(dg, restricted=(m == "kalman-restricted"), corr_grid=args.corr_grid,
                                   n_starts=args.n_starts, seed=seed)
            rows = [(("restricted" if f.restricted else "unrestricted"), f.shock_correlation,
                     f.rho_z_hat, f.se.get("rho_z", math.nan), f.g_hat, f.se.get("g", math.nan),
                     f.sigma_d_hat, f.se.get("sigma_d", math.nan), f.sigma_z_hat,
                     f.se.get("sigma_z", math.nan), f.loglik, f.aic, f.bic, f.n, f.k) for f in fits]
            Table(KALMAN_COLUMNS, rows).to_csv(out / "fits.csv")
            best = max(fits, key=lambda f: f.loglik)
            lo, hi = best.rho_ci()
            items = {"method": m, "corr": best.shock_correlation, "rho_z": best.rho_z_hat,
                     "t_rho_z": best.t_stat("rho_z"), "rho_ci_lo": lo, "rho_ci_hi": hi, "g": best.g_hat,
                     "sigma_d": best.sigma_d_hat, "sigma_z": best.sigma_z_hat, "loglik": best.loglik,
                     "aic": best.aic, "bic": best.bic, "n": best.n}
        else:
            f = fit_arma(dg, m.upper())
            Table(("model", "coef", "se_coef", "g", "se_g", "sigma", "se_sigma", "loglik", "aic", "bic", "n"),
                  [(f.model, f.coef, f.se["coef"], f.g, f.se["g"], f.sigma, f.se["sigma"], f.loglik, f.aic,
                    f.bic, f.n)]).to_csv(out / "fits.csv")
            items = {"method": m, "coef": f.coef, "g": f.g, "sigma": f.sigma, "loglik": f.loglik,
                     "aic": f.aic, "bic": f.bic, "n": f.n}
    else:
        panel = load_csv(input_path, "forecast_panel", args.frequency)
        if m.startswith("system"):
            f = estimate_rhoz_system(panel, variant=m.split("-")[1], hac_lags=args.hac_lags)
            items = {"method": m, "rho_z": f.rho_z_hat, "se_rho_z": f.se_rho_z, "t_rho_z": f.t_rho_z,
                     "intercept": f.intercept_hat, "se_intercept": f.se_intercept, "g": f.g_hat,
                     "r2": f.r2, "n": f.n}
        elif m == "ltg":
            f = estimate_rhoz_ltg(panel["ltg"], panel["e1"], hac_lags=args.hac_lags)
            items = {"method": m, "slope": f.slope, "se_slope": f.se_slope, "t_slope": f.t_slope,
                     "intercept": f.intercept, "se_intercept": f.se_intercept, "t_intercept": f.t_intercept,
                     "r2": f.r2, "n": f.n}
        else:
            s = rolling_rhoz(panel, args.window, variant=args.variant, hac_lags=args.hac_lags)
            write_csv(s, out / "rhoz.csv")
            items = {"method": m, "window": args.window, "n_windows": len(s),
                     "rho_z_mean": float(np.mean(s.values)), "rho_z_min": float(np.min(s.values)),
                     "rho_z_max": float(np.max(s.values))}
    write_kv(items, out / "fit.kv")
    return items


def cmd_estimate(args) -> int:
    seed = _resolve_seed(args) if args.method.startswith("kalman") else None
    out = _outdir(args)
    items = _estimate_outputs(args, args.input, out, seed or 0)
    _write_metadata(out, args, seed)
    _print_report({"target": args.method, "predictors": Path(args.input).name, "n_obs": items.get("n", ""),
                   **{k: v for k, v in items.items() if k not in ("method", "n")}})
    return EXIT_OK


# ---------------------------------------------------------------------------
# backtest

def _backtest_outputs(args, forecasts: DatedSeries, realized: DatedSeries, out: Path):
    res = backtest(forecasts, realized, sigma_window=args.sigma_window,
                   periods_per_year=args.periods_per_year)
    res.to_csv(out / "weights.csv")
    write_kv(res.summary(), out / "summary.kv")
    return res


def cmd_backtest(args) -> int:
    if args.s0 is not None or args.r2 is not None:
        if args.s0 is None or args.r2 is None:
            raise UsageError("the formula path needs both --s0 and --r2")
        print(f"{timing_sharpe(args.s0, args.r2):.2f}")
        return EXIT_OK
    if not args.forecasts or not args.realized:
        raise UsageError("--forecasts and --realized are required (or use --s0/--r2)")
    out = _outdir(args)
    f = load_csv(args.forecasts, "series", args.frequency)
    r = load_csv(args.realized, "series", args.frequency)
    res = _backtest_outputs(args, f, r, out)
    _write_metadata(out, args)
    for k, v in res.summary().items():
        print(f"{k:<16} {v:.4f}" if isinstance(v, float) else f"{k:<16} {v}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# demo

def _forecast_panel(path_panel: Panel, vs: ValuationSeries) -> Panel:
    """Valuation ratios with annual return and dividend-growth targets."""
    P = path_panel["P"]
    div = path_panel["div"]
    ret12 = annual_log_return(P, div)
    n = len(ret12)
    D = path_panel["D"].values
    cols = {c: getattr(vs, c).values[:n] for c in ("dr", "pd", "s05", "s1plus")}
    cols["ret12"] = ret12.values
    cols["r1"] = path_panel["r"].values[:n]
    cols["dg12"] = np.log(D[12:12 + n] / D[:n]) if len(D) >= n + 12 else np.full(n, math.nan)
    if not np.array_equal(vs.dr.dates[:n], ret12.dates):
        raise ValidationError("valuation and return dates disagree")
    keep = np.isfinite(cols["dg12"])
    return Panel(ret12.dates[keep], {k: v[keep] for k, v in cols.items()}, "monthly")


def cmd_demo(args) -> int:
    seed = _resolve_seed(args)
    root = _outdir(args)
    sim_out = _outdir(args, "simulate")
    args.frequency = "monthly"
    params, path = _simulate_outputs(args, seed, sim_out)

    strips_out = _outdir(args, "strips")
    vs = _strips_outputs(args, sim_out / "snapshots.csv", strips_out)

    fc_out = _outdir(args, "forecast")
    panel = _forecast_panel(load_csv(sim_out / "path.csv", "panel", "monthly"), vs)
    write_csv(panel, fc_out / "panel.csv")
    fargs = argparse.Namespace(**vars(args))
    fargs.target, fargs.predictors = "ret12", ["dr", "pd", "dr,pd"]
    fargs.horizon, fargs.lead, fargs.one_period_target = 12, 0, "r1"
    fargs.oos_start = str(panel.dates[min(120, len(panel) - 2)])
    fargs.cw_lags, fargs.scan = None, True
    results = _forecast_outputs(fargs, panel, fc_out, seed)

    est_out = _outdir(args, "estimate")
    eargs = argparse.Namespace(**vars(args))
    eargs.frequency = None
    fit_items = {}
    for method, src in (("kalman", sim_out / "dividend_growth.csv"), ("system-Y1Y3", sim_out / "analyst.csv"),
                        ("ltg", sim_out / "analyst.csv"), ("rolling", sim_out / "analyst.csv")):
        eargs.method = method
        sub = est_out / method
        sub.mkdir(exist_ok=True)
        fit_items[method] = _estimate_outputs(eargs, src, sub, seed)

    bt_out = _outdir(args, "backtest")
    oos = results[0][2]
    rf = params.r_f
    idx = np.searchsorted(path.dates, oos.dates)
    forecasts = DatedSeries(oos.dates, (oos.forecast - rf) / 12.0, "monthly", "forecast", True)
    realized = DatedSeries(oos.dates, path.r[idx] - rf / 12.0, "monthly", "realized", True)
    write_csv(forecasts, bt_out / "forecasts.csv")
    write_csv(realized, bt_out / "realized.csv")
    res = _backtest_outputs(args, forecasts, realized, bt_out)

    _write_metadata(root, args, seed, {"path.pd_bar": path.pd_bar})
    rep = results[0][1]
    print(f"demo (seed {seed}) -> {root}")
    print(f"  mean dr {np.mean(vs.dr.values):.3f}, duration {math.exp(np.mean(vs.dr.values)):.1f} years")
    print(f"  ret12 ~ dr: beta {rep.beta[1]:.3f}, NW t {rep.t_nw[1]:.2f}, R2 {rep.r2:.3f}, OOS R2 {rep.r2_oos:.3f}")
    print(f"  kalman rho_z {fit_items['kalman']['rho_z']:.3f}, system rho_z {fit_items['system-Y1Y3']['rho_z']:.3f}")
    print(f"  timing: s0 {res.s0:.3f}, s1 {res.sharpe_annualized:.3f}, improvement {res.improvement_pct:.1f}%")
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _global_parent() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("global options")
    g.add_argument("--seed", type=int, default=None, help="random seed (fallback: DURLAB_SEED)")
    g.add_argument("--out", default="out", help="output directory")
    g.add_argument("--log-level", default="WARNING", choices=("DEBUG", "INFO", "WARNING", "ERROR"))
    g.add_argument("--config", default=None, help="flat key = value file supplying defaults")
    g.add_argument("--jobs", type=int, default=1, help="worker cap for parallel inner loops")
    return p


def _add_simulate_args(p):
    p.add_argument("--T", type=int, default=384, help="number of periods")
    p.add_argument("--frequency", choices=("annual", "monthly"), default="monthly")
    p.add_argument("--maturities", type=_floats, default=(0.5, 1.0, 2.0))
    p.add_argument("--params", default=None, help="ModelParams2D key = value file")
    p.add_argument("--rho-z", dest="rho_z", type=float, default=None)
    p.add_argument("--rho-y", dest="rho_y", type=float, default=None)
    p.add_argument("--g-bar", dest="g_bar", type=float, default=None)
    p.add_argument("--lambda-bar", dest="lambda_bar", type=float, default=None)
    p.add_argument("--r-f", dest="r_f", type=float, default=None)
    p.add_argument("--analyst-noise", type=float, default=0.002)
    p.add_argument("--analyst-noise-rho", type=float, default=0.9)


def _add_strips_args(p):
    p.add_argument("--policy", choices=("fail-fast", "skip"), default="fail-fast")
    p.add_argument("--interpolation", choices=("pchip", "linear"), default="pchip")


def _add_forecast_args(p, demo=False):
    p.add_argument("--nw-lags", type=int, default=18)
    p.add_argument("--bootstrap", type=int, default=200 if demo else 0, metavar="N")
    p.add_argument("--block-len", type=int, default=18)
    if demo:
        return
    p.add_argument("--target", required=True)
    p.add_argument("--predictors", action="append", help="comma-separated set; repeat for several specs")
    p.add_argument("--horizon", type=int, default=1)
    p.add_argument("--lead", type=int, default=0)
    p.add_argument("--one-period-target", default=None)
    p.add_argument("--oos-start", default=None)
    p.add_argument("--cw-lags", type=int, default=None)
    p.add_argument("--scan", action="store_true")


def _add_estimate_args(p, demo=False):
    p.add_argument("--corr-grid", type=_floats, default=(0.0,))
    p.add_argument("--n-starts", type=int, default=10)
    p.add_argument("--hac-lags", type=int, default=18)
    p.add_argument("--window", type=int, default=36)
    p.add_argument("--variant", choices=("Y1Y3", "Y1Y2"), default="Y1Y3")


def _add_backtest_args(p):
    p.add_argument("--sigma-window", type=int, default=12)
    p.add_argument("--periods-per-year", type=int, default=12)


def build_parser() -> argparse.ArgumentParser:
    parent = _global_parent()
    parser = argparse.ArgumentParser(prog="durlab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"durlab {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[parent], help="simulate the two-state economy")
    _add_simulate_args(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("strips", parents=[parent], help="build dividend strips and valuation ratios")
    p.add_argument("--snapshots", required=True)
    _add_strips_args(p)
    p.set_defaults(func=cmd_strips)

    p = sub.add_parser("forecast", parents=[parent], help="predictive regression battery")
    p.add_argument("--panel", required=True)
    p.add_argument("--frequency", default=None)
    _add_forecast_args(p)
    p.set_defaults(func=cmd_forecast)

    p = sub.add_parser("estimate", parents=[parent], help="estimate the persistence of expected growth")
    p.add_argument("--input", required=True)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--frequency", default=None)
    _add_estimate_args(p)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("backtest", parents=[parent], help="market-timing backtest")
    p.add_argument("--forecasts")
    p.add_argument("--realized")
    p.add_argument("--frequency", default=None)
    p.add_argument("--s0", type=float, default=None)
    p.add_argument("--r2", type=float, default=None)
    _add_backtest_args(p)
    p.set_defaults(func=cmd_backtest)

    p = sub.add_parser("demo", parents=[parent], help="simulate, build strips, forecast, estimate, backtest")
    _add_simulate_args(p)
    _add_strips_args(p)
    _add_forecast_args(p, demo=True)
    _add_estimate_args(p, demo=True)
    _add_backtest_args(p)
    p.set_defaults(func=cmd_demo)
    return parser


def _subparser(parser, command):
    for action in parser._subparsers._group_actions:
        if command in action.choices:
            return action.choices[command]
    raise UsageError(f"unknown command {command!r}")


def _apply_config(parser, argv) -> None:
    """Install ``--config`` entries as defaults of the chosen subcommand."""
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("command", nargs="?")
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if not known.config or not known.command:
        return
    try:
        kv = read_kv(known.config)
    except ParseError as exc:
        raise UsageError(f"config {known.config}: {exc}") from None
    sp = _subparser(parser, known.command)
    actions = {a.dest: a for a in sp._actions}
    defaults, overrides = {}, {}
    for key, value in kv.items():
        dest = key.replace("-", "_")
        if dest in actions and dest not in ("config", "help"):
            a = actions[dest]
            if isinstance(a, argparse._AppendAction):
                defaults[dest] = [s.strip() for s in value.split(";") if s.strip()]
            elif isinstance(a, argparse._StoreTrueAction):
                defaults[dest] = value.lower() in ("1", "true", "yes")
            else:
                defaults[dest] = value        # argparse converts string defaults with the action's type
        elif known.command in ("simulate", "demo") and key in PARAM_FIELDS:
            if key in VECTOR_FIELDS:
                overrides[key] = to_vector(value, key)
            elif key == "Sigma":
                from .kvfile import to_matrix
                overrides[key] = to_matrix(value, key)
            else:
                overrides[key] = to_float(value, key)
        else:
            raise UsageError(f"config {known.config}: unknown key {key!r} for {known.command}")
    for dest, v in defaults.items():
        a = actions[dest]
        if a.choices is not None and isinstance(v, str) and v not in a.choices:
            raise UsageError(f"config {known.config}: {dest} must be one of {list(a.choices)}")
    sp.set_defaults(**defaults, param_overrides=overrides)


def _exit_code(exc: BaseException, command: str | None) -> int:
    if isinstance(exc, (UsageError, ParameterError)):
        return EXIT_USAGE
    if isinstance(exc, (EstimationError, NumericalError)):
        return EXIT_ESTIMATION
    if isinstance(exc, DegeneracyError):
        return EXIT_ESTIMATION if command == "estimate" else EXIT_DATA
    if isinstance(exc, (ValidationError, OSError)):
        return EXIT_DATA
    return EXIT_ESTIMATION


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        _apply_config(parser, argv)
    except DurlabError as exc:
        print(f"durlab: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    if not hasattr(args, "param_overrides"):
        args.param_overrides = {}
    logging.basicConfig(level=getattr(logging, args.log_level), stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (DurlabError, OSError) as exc:
        code = _exit_code(exc, args.command)
        print(f"durlab {args.command}: error: {exc}", file=sys.stderr)
        return code
