"""Pure-NumPy fallback implementations of the filter inner loops.

Mirrors ``_native`` (the Cython extension) function-for-function; the
drivers in ``estimators``/``particle`` prepare all gain arrays so these
loops touch nothing but float math.  Estimates are written into
caller-supplied output arrays; entries before warm-up are NaN.
"""
from __future__ import annotations

import math

import numpy as np

BACKEND = "pure"

_OVERFLOW_GUARD = 1e150


def _transform(r: float, gaussian: int, K: float, s2n: float) -> float:
    if gaussian:
        return r
    if abs(r) > _OVERFLOW_GUARD:
        return 0.0
    return K * r / (s2n + r * r)


def moving_horizon_run(u, y, phi, gam, om, warm_gain, L, Lt, hrow,
                       gaussian, K, s2n, anchor, xhat, yhat):
    """Windowed recursion (warm-up batch solve, then per-step update).

    ``anchor > 0`` re-synchronizes the estimate from the transformed-
    measurement buffer every ``anchor`` steps, which removes the float
    drift the recursion's expansive removal term would otherwise
    accumulate.
    """
    T = y.shape[0]
    N = warm_gain.shape[1]
    xhat[:N - 1] = np.nan
    yhat[:N - 1] = np.nan
    s = np.zeros(phi.shape[0])
    wbuf = np.empty(N)
    for k in range(N):
        wbuf[k] = _transform(y[k] - s[0], gaussian, K, s2n)
        if k < N - 1:
            s = phi @ s + gam * u[k] + om * y[k]
    xh = s + warm_gain @ wbuf
    xhat[N - 1] = xh
    yhat[N - 1] = xh[0]
    ulast = u[N - 1]
    ylast = y[N - 1]
    since = 0
    for t in range(N, T):
        delta = xh - s
        pred = phi @ xh + gam * ulast + om * ylast
        s = phi @ s + gam * ulast + om * ylast
        w_new = _transform(y[t] - s[0], gaussian, K, s2n)
        removal = wbuf[0] - hrow @ delta
        xh = pred + L * (w_new + s[0] - pred[0]) - Lt * removal
        wbuf[:-1] = wbuf[1:]
        wbuf[-1] = w_new
        since += 1
        if anchor > 0 and since >= anchor:
            xh = s + warm_gain @ wbuf
            since = 0
        ulast = u[t]
        ylast = y[t]
        xhat[t] = xh
        yhat[t] = xh[0]
    return 0


def growing_run(u, y, phi, gam, om, warm_gain, L_sched,
                gaussian, K, s2n, xhat, yhat):
    """Growing-memory recursion with a precomputed per-step gain schedule.

    ``warm_gain`` is the n x n batch gain for the first ``n`` samples;
    ``L_sched[t]`` is the gain used to produce the estimate at 0-based
    time ``t`` (rows before the warm index are ignored).
    """
    T = y.shape[0]
    n = phi.shape[0]
    xhat[:n - 1] = np.nan
    yhat[:n - 1] = np.nan
    s = np.zeros(n)
    w0 = np.empty(n)
    for k in range(n):
        w0[k] = _transform(y[k] - s[0], gaussian, K, s2n)
        if k < n - 1:
            s = phi @ s + gam * u[k] + om * y[k]
    xh = s + warm_gain @ w0
    xhat[n - 1] = xh
    yhat[n - 1] = xh[0]
    ulast = u[n - 1]
    ylast = y[n - 1]
    for t in range(n, T):
        pred = phi @ xh + gam * ulast + om * ylast
        s = phi @ s + gam * ulast + om * ylast
        w_new = _transform(y[t] - s[0], gaussian, K, s2n)
        xh = pred + L_sched[t] * (w_new + s[0] - pred[0])
        ulast = u[t]
        ylast = y[t]
        xhat[t] = xh
        yhat[t] = xh[0]
    return 0


def kalman_run(u, y, phi_a, gam, Kp_sched, Kf_sched, xhat, yhat):
    """Correlated-noise Kalman filter with precomputed gain schedules.

    ``Kp_sched[k]`` is the predictor gain, ``Kf_sched[k]`` the filtered
    update gain at 0-based time k (both data-independent).
    """
    T = y.shape[0]
    n = phi_a.shape[0]
    x = np.zeros(n)
    for k in range(T):
        eps = y[k] - x[0]
        xf = x + Kf_sched[k] * eps
        xhat[k] = xf
        yhat[k] = xf[0]
        x = phi_a @ x + gam * u[k] + Kp_sched[k] * eps
    return 0


def particle_run(u, y, phi, gam, om, parts, logw, gaussian, nu, s2n,
                 resample_u, ess_frac, est_out):
    """Bootstrap particle sweep over ``len(y)`` steps.

    Exploits the shared-noise structure: the residual ``e = y - x[0]``
    both weights the particle and (deterministically) drives its
    propagation ``x+ = Phi x + Gamma u + Omega y``.  Systematic
    resampling triggers when ESS falls below ``ess_frac * P`` (never
    after the final weighting).  Returns the number of degenerate-weight
    resets (all weights underflowed; weights restored to uniform).
    """
    W = y.shape[0]
    P = parts.shape[0]
    resets = 0
    for k in range(W):
        e = y[k] - parts[:, 0]
        if gaussian:
            logw += -0.5 * e * e / s2n
        else:
            logw += -0.5 * (nu + 1.0) * np.log1p(e * e / s2n)
        m = np.max(logw)
        wgt = np.exp(logw - m)
        tot = wgt.sum()
        if not np.isfinite(tot) or tot <= 0.0:
            resets += 1
            logw[:] = 0.0
            wgt[:] = 1.0
            tot = float(P)
        wgt /= tot
        est_out[k] = wgt @ parts
        ess = 1.0 / np.sum(wgt * wgt)
        if ess < ess_frac * P:
            cdf = np.cumsum(wgt)
            pts = (resample_u[k] + np.arange(P)) / P
            idx = np.minimum(np.searchsorted(cdf, pts), P - 1)
            parts[:] = parts[idx]
            logw[:] = 0.0
        parts[:] = parts @ phi.T + gam * u[k] + om * y[k]
    return resets
