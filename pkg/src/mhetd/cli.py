"""Command-line interface.

Subcommands wrap the library: ``simulate`` and ``estimate`` operate on
single trajectories; ``table2``, ``outlier`` and ``pfcompare`` run the
seeded Monte Carlo reproductions and emit CSV files into the output
directory.  Exit codes: 0 success, 1 numerical failure, 2
configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import csvio
from .armax import build_state_space, simulate, s_sequence
from .config import RunSettings, load_settings
from .errors import ConfigError, MhetdError
from .estimators import (ArmaxFilter, KalmanFilter, MheTdFilter, MwlseFilter,
                         compute_gains)
from .experiments import (run_outlier_experiment, run_pf_comparison,
                          run_variance_experiment)
from .mle import solve_windowed_mle
from .particle import run_windowed


def _common_args(sub):
    sub.add_argument("--config", required=True, help="key=value config file")
    sub.add_argument("--out", default=".", help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="master seed override")
    sub.add_argument("-v", "--verbose", action="store_true")


def _mc_args(sub):
    sub.add_argument("--runs", type=int, default=None, help="Monte Carlo runs")
    sub.add_argument("--quick", action="store_true",
                     help="100 runs (CI-sized) unless --runs given")


def _load(args) -> RunSettings:
    settings = load_settings(args.config)
    if args.seed is not None:
        settings.seed = args.seed
    if getattr(args, "quick", False):
        settings.runs = 100
    if getattr(args, "runs", None):
        settings.runs = args.runs
    return settings


def _cmd_simulate(args) -> int:
    settings = _load(args)
    rng = settings.generator()
    outliers = [settings.outlier] if settings.outlier else None
    traj = simulate(settings.model, settings.T, rng, outliers=outliers)
    out = Path(args.out) / "trajectory.csv"
    csvio.write_trajectory(out, traj)
    if args.verbose:
        print(f"wrote {out} ({settings.T} rows)", file=sys.stderr)
    return 0


def _estimate_trace(settings: RunSettings, u, y):
    """(x_hat, y_hat) traces for the configured estimator; NaN before warm-up."""
    kind = settings.estimator_kind
    if kind is None:
        raise ConfigError("missing config key 'estimator.kind'")
    model = settings.model
    ss = build_state_space(model)
    T = len(y)
    xhat = np.full((T, ss.n), np.nan)
    yhat = np.full(T, np.nan)

    if kind in ("mhe_td", "mwlse"):
        if settings.N is None:
            raise ConfigError("missing config key 'estimator.N'")
        cls = MheTdFilter if kind == "mhe_td" else MwlseFilter
        filt = cls(ss, model.noise, settings.N)
        N = settings.N
        if T < N:
            raise ConfigError(f"trajectory shorter than window N={N}")
        filt.warm_up(u[:N], y[:N])
        xhat[N - 1] = filt.x_hat
        yhat[N - 1] = filt.x_hat[0]
        for k in range(N, T):
            xhat[k], yhat[k] = filt.step(u[k], y[k])
    elif kind == "armax_filter":
        filt = ArmaxFilter(ss, model.noise)
        n = ss.n
        if T < n:
            raise ConfigError(f"trajectory shorter than order n={n}")
        filt.warm_up(u[:n], y[:n])
        xhat[n - 1] = filt.x_hat
        yhat[n - 1] = filt.x_hat[0]
        for k in range(n, T):
            xhat[k], yhat[k] = filt.step(u[k], y[k])
    elif kind == "kalman":
        filt = KalmanFilter(ss, model.noise.variance)
        for k in range(T):
            xhat[k], yhat[k] = filt.step(u[k], y[k])
    elif kind == "mle":
        if settings.N is None:
            raise ConfigError("missing config key 'estimator.N'")
        gains = compute_gains(ss, settings.N)
        for k in range(settings.N, T + 1):
            res = solve_windowed_mle(gains, ss, model.noise, u, y, k,
                                     horizon=settings.mle_horizon)
            xhat[k - 1] = res.x_hat
            yhat[k - 1] = res.y_hat
    elif kind == "pf":
        if settings.N is None:
            raise ConfigError("missing config key 'estimator.N'")
        N = settings.N
        P = settings.pf_particles[0]
        rng = settings.generator()
        s = s_sequence(ss, u, y)
        for k in range(N, T + 1):
            est, _ = run_windowed(ss, model.noise, u[k - N:k], y[k - N:k],
                                  s[k - N], P, rng,
                                  prior_scale=settings.pf_prior_scale)
            xhat[k - 1] = est[-1]
            yhat[k - 1] = est[-1, 0]
    else:
        raise ConfigError(f"unsupported estimator.kind {kind!r}")
    return xhat, yhat


def _cmd_estimate(args) -> int:
    settings = _load(args)
    traj = csvio.read_trajectory(args.trajectory)
    xhat, yhat = _estimate_trace(settings, traj.u, traj.y)
    out = Path(args.out) / "estimates.csv"
    ks = range(1, len(traj.y) + 1)
    csvio.write_estimates(out, ks, traj.y, yhat, settings.estimator_kind)
    trace = Path(args.out) / "state_trace.csv"
    csvio.write_state_trace(trace, xhat, yhat)
    if args.verbose:
        print(f"wrote {out} and {trace}", file=sys.stderr)
    return 0


def _cmd_table2(args) -> int:
    settings = _load(args)
    result = run_variance_experiment(settings, rho_mode=args.rho_mode)
    outdir = Path(args.out)
    by_kind = {}
    for cell in result.cells:
        by_kind.setdefault(cell["estimator"], []).append(cell)
    for kind, rows in by_kind.items():
        path = outdir / f"table2_{kind}.csv"
        csvio.write_variance_table(path, rows)
        if args.verbose:
            print(f"wrote {path}", file=sys.stderr)
    return 0


def _cmd_outlier(args) -> int:
    settings = _load(args)
    result = run_outlier_experiment(settings)
    out = Path(args.out) / "outlier_trace.csv"
    csvio.write_outlier_trace(out, result.rows())
    if args.verbose:
        print(f"wrote {out}", file=sys.stderr)
    return 0


def _cmd_pfcompare(args) -> int:
    settings = _load(args)
    report = run_pf_comparison(settings)
    out = Path(args.out) / "index_report.csv"
    csvio.write_index_report(out, report.rows)
    if args.verbose:
        print(f"backend={report.backend} pf_resets={report.pf_resets}",
              file=sys.stderr)
        print(f"wrote {out}", file=sys.stderr)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mhetd",
        description="Robust moving-horizon estimation for ARMAX processes "
                    "with Student-t noise")
    subs = parser.add_subparsers(dest="command", required=True)

    sub = subs.add_parser("simulate", help="simulate a trajectory to CSV")
    _common_args(sub)
    sub.set_defaults(func=_cmd_simulate)

    sub = subs.add_parser("estimate", help="run an estimator over a trajectory")
    _common_args(sub)
    sub.add_argument("--trajectory", required=True, help="trajectory CSV path")
    sub.set_defaults(func=_cmd_estimate)

    sub = subs.add_parser("table2", help="variance table reproduction")
    _common_args(sub)
    _mc_args(sub)
    sub.add_argument("--rho-mode", choices=("paper", "analytic"),
                     default="paper",
                     help="published fixture rho3 vs analytic closed form")
    sub.set_defaults(func=_cmd_table2)

    sub = subs.add_parser("outlier", help="outlier response reproduction")
    _common_args(sub)
    _mc_args(sub)
    sub.set_defaults(func=_cmd_outlier)

    sub = subs.add_parser("pfcompare",
                          help="accuracy/speed comparison vs particle filter")
    _common_args(sub)
    _mc_args(sub)
    sub.set_defaults(func=_cmd_pfcompare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except MhetdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
