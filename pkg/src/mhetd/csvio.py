"""CSV writers/readers for the file interfaces.

All files are UTF-8, comma-delimited, with a mandatory header row;
floats carry at least six significant digits.  Missing values (e.g.
estimates before warm-up) are written as empty fields.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .armax import Trajectory
from .errors import ConfigError


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        if math.isnan(value):
            return ""
        return format(value, ".10g")
    return str(value)


def _write_rows(path, header, rows, preamble=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        if preamble:
            fh.write(f"# {preamble}\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def write_trajectory(path, traj: Trajectory):
    rows = ((k + 1, traj.u[k], traj.y[k], traj.e[k]) for k in range(len(traj)))
    _write_rows(path, ("k", "u", "y", "e"), rows)


def read_trajectory(path) -> Trajectory:
    u, y, e = [], [], []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(row for row in fh if not row.startswith("#"))
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:4]] != ["k", "u", "y", "e"]:
            raise ConfigError(f"{path}: expected header k,u,y,e")
        for fields in reader:
            if not fields:
                continue
            u.append(float(fields[1]))
            y.append(float(fields[2]))
            e.append(float(fields[3]))
    n = len(y)
    return Trajectory(u=np.asarray(u), y=np.asarray(y), e=np.asarray(e),
                      x=np.zeros((n, 0)))


def write_estimates(path, ks, y, y_hat, estimator: str):
    """Per-step estimates; warm-up rows carry an empty y_hat field."""
    rows = ((k, yk, (None if math.isnan(yh) else yh), estimator)
            for k, yk, yh in zip(ks, y, y_hat))
    _write_rows(path, ("k", "y", "y_hat", "estimator"), rows,
                preamble="rows with empty y_hat precede filter warm-up")


def write_state_trace(path, xhat: np.ndarray, yhat: np.ndarray):
    n = xhat.shape[1]
    header = ("k", *(f"x_hat_{i + 1}" for i in range(n)), "y_hat")
    rows = ((k + 1, *(xhat[k, j] for j in range(n)), yhat[k])
            for k in range(len(yhat)))
    _write_rows(path, header, rows)


def write_variance_table(path, rows):
    """Rows: dicts with N,k,var_theoretical,var_mc,term1..3,var_mc_se,runs."""
    header = ("N", "k", "var_theoretical", "var_mc", "term1", "term2",
              "term3", "var_mc_se", "runs")
    _write_rows(path, header,
                ([r.get(h) for h in header] for r in rows))


def write_outlier_trace(path, rows):
    header = ("k", "E_yhat_mhe_td", "E_yhat_mwlse", "mc_mean_mhe_td",
              "mc_mean_mwlse")
    _write_rows(path, header,
                ([r.get(h) for h in header] for r in rows))


def write_index_report(path, rows):
    header = ("estimator", "k", "I_k", "median_step_us", "runs")
    _write_rows(path, header,
                ([r.get(h) for h in header] for r in rows))


def read_table(path) -> list:
    """Generic reader: list of dicts keyed by header names."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(row for row in fh if not row.startswith("#"))
        return list(reader)
