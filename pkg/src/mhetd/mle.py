"""Numerical maximum-likelihood ground truth for the windowed problem.

The likelihood is parameterized by the deviation ``xi = x_T - s_T`` of
the final-instant state from its measurement reconstruction, so the
regressors are the O(1) rows ``H Phi^{k-T}`` and the Hessian stays well
conditioned at any horizon.  The full-history variant optimizes over
the initial state instead (regressors ``H Phi^{k-1}``, also bounded)
and maps forward through ``x_T = s_T + Phi^{T-1} x_1``.

A damped Newton iteration with an eigenvalue shift handles the
indefinite regions of the t-likelihood; it is multi-started from the
raw least-squares (moving-window) solution and from zero, keeping the
lower-objective converged iterate.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .armax import StateSpaceRealization, s_sequence
from .errors import InsufficientData
from .estimators import FilterGains, _matrix_power, _pos_power_rows
from .noise import TDistribution

_GRAD_TOL = 1e-10
_MAX_ITER = 200


@dataclass
class MleResult:
    """Solver outcome; ``converged`` False returns the best iterate."""

    x_hat: np.ndarray
    y_hat: float
    objective: float
    grad_norm: float
    converged: bool
    iterations: int


def _newton(res0: np.ndarray, R: np.ndarray, nu: float, s2n: float,
            x0: np.ndarray):
    """Damped Newton on J(xi) = 0.5 (nu+1) sum log1p((r - R xi)^2/s2n)."""
    dim = R.shape[1]
    np1 = nu + 1.0

    def objective(xi):
        e = res0 - R @ xi
        return 0.5 * np1 * float(np.sum(np.log1p(e * e / s2n)))

    def grad(xi):
        e = res0 - R @ xi
        return -R.T @ (np1 * e / (s2n + e * e))

    xi = np.asarray(x0, dtype=float).copy()
    J = objective(xi)
    it = 0
    for it in range(1, _MAX_ITER + 1):
        g = grad(xi)
        gnorm = float(np.max(np.abs(g)))
        if gnorm < _GRAD_TOL:
            return xi, J, gnorm, True, it
        e = res0 - R @ xi
        d = np1 * (s2n - e * e) / (s2n + e * e) ** 2
        H = (R * d[:, None]).T @ R
        # shift the Hessian positive definite where the loss is non-convex
        ev_min = float(np.min(np.linalg.eigvalsh(H)))
        if ev_min < 1e-8:
            H = H + (1e-8 - ev_min) * np.eye(dim)
        step = np.linalg.solve(H, -g)
        t = 1.0
        descent = float(g @ step)
        while t > 1e-12:
            J_new = objective(xi + t * step)
            if J_new <= J + 1e-4 * t * descent:
                break
            t *= 0.5
        if t <= 1e-12:
            break
        xi = xi + t * step
        J = J_new
    g = grad(xi)
    return xi, objective(xi), float(np.max(np.abs(g))), False, it


def solve_windowed_mle(gains: FilterGains, ss: StateSpaceRealization,
                       noise: TDistribution, u: np.ndarray, y: np.ndarray,
                       t: int, horizon: str = "window") -> MleResult:
    """Likelihood ground truth at 1-based time ``t``.

    ``horizon="window"`` (default) restricts the likelihood to the last
    N residuals, which is the problem the moving-horizon estimator
    approximates; ``horizon="full"`` uses all residuals up to ``t``.
    Gaussian-mode noise solves the normal equations directly (the MLE
    and least-squares estimates coincide).
    """
    if horizon not in ("window", "full"):
        raise ValueError(f"unknown horizon {horizon!r}")
    N = gains.N
    if t < N or t > len(y):
        raise InsufficientData(f"need N={N} <= t <= {len(y)}")
    s = s_sequence(ss, u[:t], y[:t])
    res_all = y[:t] - s[:, 0]

    if horizon == "window":
        R = gains.rows_neg                      # (N, n): H Phi^{k-t}
        res0 = res_all[t - N:]
        to_state = None
    else:
        R = _pos_power_rows(np.asarray(ss.phi), t)   # (t, n): H Phi^{k-1}
        res0 = res_all
        to_state = _matrix_power(np.asarray(ss.phi), t - 1)

    if noise.is_gaussian:
        theta, *_ = np.linalg.lstsq(R, res0, rcond=None)
        e = res0 - R @ theta
        obj = 0.5 * float(e @ e) / noise.sigma**2
        gnorm = float(np.max(np.abs(R.T @ e))) / noise.sigma**2
        best = (theta, obj, gnorm, True, 0)
    else:
        s2n = noise.sigma**2 * noise.nu
        gram = R.T @ R
        ls_start = np.linalg.solve(gram, R.T @ res0)
        best = None
        for x0 in (ls_start, np.zeros(R.shape[1])):
            cand = _newton(res0, R, noise.nu, s2n, x0)
            if best is None:
                best = cand
            elif cand[3] and not best[3]:
                best = cand
            elif cand[3] == best[3] and cand[1] < best[1]:
                best = cand

    theta, obj, gnorm, converged, iters = best
    x_hat = s[t - 1] + (theta if to_state is None else to_state @ theta)
    return MleResult(x_hat=x_hat, y_hat=float(x_hat[0]), objective=obj,
                     grad_norm=gnorm, converged=converged, iterations=iters)
