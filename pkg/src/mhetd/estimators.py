"""Moving-horizon, growing-memory, and Kalman estimators.

All estimators share the innovation-form geometry: the measurement
recursion ``s`` reconstructs the reachable part of the state from past
data, and the estimators differ only in how they fit the residual
deviation from ``s`` over a window of transformed residuals.

Numerical notes
---------------
* Negative powers of the innovation matrix are obtained by repeated
  linear solves (never by forming an inverse and powering): companion
  matrices with repeated roots are non-normal and ill-conditioned.
* The windowed recursion's removal term is evaluated in the regrouped
  form ``w_old - H Phi^{1-N} (x_hat - s)``, algebraically identical to
  the textbook form with the Xi input/output stacks but applying the
  expansive ``Phi^{1-N}`` to the small deviation instead of to the raw
  state, which shrinks roundoff injection by orders of magnitude.
* The recursion's float-error dynamics have spectral radius equal to
  that of ``Phi^{-1}`` (> 1), so long runs drift.  The filter therefore
  re-anchors the estimate every ``anchor_every`` steps (default 2)
  directly from its transformed-measurement buffer, which reproduces
  the windowed batch estimate exactly at negligible cost;
  ``anchor_every=1`` pins every output to the batch value and
  ``anchor_every=0`` runs the bare recursion.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import _kernels
from .armax import StateSpaceRealization
from .errors import (InsufficientData, NotWarmedUp, PhiSingular,
                     SingularInformation)
from .noise import TDistribution

_COND_LIMIT = 1e12


def _neg_power_rows(phi: np.ndarray, N: int) -> np.ndarray:
    """Rows ``H Phi^{i-N}`` for i = 1..N (row i-1), H = e1."""
    n = phi.shape[0]
    rows = np.empty((N, n))
    r = np.zeros(n)
    r[0] = 1.0
    rows[N - 1] = r
    for i in range(N - 2, -1, -1):
        r = np.linalg.solve(phi.T, r)
        rows[i] = r
    return rows


def _pos_power_rows(phi: np.ndarray, N: int) -> np.ndarray:
    """Rows ``H Phi^{i-1}`` for i = 1..N (row i-1), H = e1."""
    n = phi.shape[0]
    rows = np.empty((N, n))
    r = np.zeros(n)
    r[0] = 1.0
    rows[0] = r
    for i in range(1, N):
        r = r @ phi
        rows[i] = r
    return rows


def _matrix_power(phi: np.ndarray, k: int) -> np.ndarray:
    out = np.eye(phi.shape[0])
    for _ in range(k):
        out = out @ phi
    return out


def _inv_matrix_power(phi: np.ndarray, k: int) -> np.ndarray:
    """``Phi^{-k}`` by k successive solves."""
    out = np.eye(phi.shape[0])
    for _ in range(k):
        out = np.linalg.solve(phi, out)
    return out


@dataclass(frozen=True)
class FilterGains:
    """Data-independent gain set for a window of length N.

    ``P_N`` inverts the forward-power Gram, ``M_N`` the backward-power
    Gram; they satisfy ``M_N = Phi^{N-1} P_N (Phi^{N-1})'``.  ``L_N``
    and ``Ltilde_N`` are the insertion/removal gains of the recursion,
    ``xi_u``/``xi_y`` the input/output stacks entering the textbook
    removal term, and ``warm_gain = M_N [rows of (H Phi^{i-N})']`` maps
    the window's transformed residuals straight to the deviation
    estimate.
    """

    N: int
    L_N: np.ndarray           # (n,)
    Ltilde_N: np.ndarray      # (n,)
    P_N: np.ndarray           # (n, n)
    M_N: np.ndarray           # (n, n)
    phi_inv_pow: np.ndarray   # (n, n) = Phi^{-(N-1)}
    xi_u: np.ndarray          # (n, N-1)
    xi_y: np.ndarray          # (n, N-1)
    rows_neg: np.ndarray      # (N, n), row i-1 = H Phi^{i-N}
    warm_gain: np.ndarray     # (n, N)
    cond_information: float   # condition number of the P_N Gram

    @property
    def h_phi_inv(self) -> np.ndarray:
        """Row ``H Phi^{1-N}``."""
        return self.rows_neg[0]


def compute_gains(ss: StateSpaceRealization, N: int) -> FilterGains:
    """All window gains for the realization; N >= n required.

    Raises PhiSingular when the trailing C coefficient vanishes and
    SingularInformation when either window Gram is numerically singular
    (condition number above 1e12).
    """
    n = ss.n
    phi = np.asarray(ss.phi)
    if phi[n - 1, 0] == 0.0:
        raise PhiSingular("trailing C coefficient is zero; Phi not invertible")
    if N < n:
        raise SingularInformation(
            f"window N={N} shorter than state dimension n={n}")

    rows_pos = _pos_power_rows(phi, N)
    gram_p = rows_pos.T @ rows_pos
    cond_p = float(np.linalg.cond(gram_p))
    rows_neg = _neg_power_rows(phi, N)
    gram_m = rows_neg.T @ rows_neg
    cond_m = float(np.linalg.cond(gram_m))
    if not math.isfinite(cond_p) or cond_p > _COND_LIMIT \
            or not math.isfinite(cond_m) or cond_m > _COND_LIMIT:
        raise SingularInformation(
            f"window Gram condition {max(cond_p, cond_m):.3e} exceeds 1e12")

    P_N = np.linalg.inv(gram_p)
    M_N = np.linalg.inv(gram_m)
    phi_pow = _matrix_power(phi, N - 1)
    L_N = phi_pow @ P_N @ rows_pos[N - 1]
    h_inv1 = np.linalg.solve(phi.T, rows_pos[0])      # H Phi^{-1}
    Lt_N = phi_pow @ P_N @ h_inv1
    phi_inv_pow = _inv_matrix_power(phi, N - 1)

    gam = np.asarray(ss.gamma)[:, 0]
    om = np.asarray(ss.omega)[:, 0]
    xi_u = np.empty((n, max(N - 1, 0)))
    xi_y = np.empty((n, max(N - 1, 0)))
    acc_g, acc_o = gam.copy(), om.copy()
    for j in range(N - 2, -1, -1):            # column j holds Phi^{N-2-j} *
        xi_u[:, j] = acc_g
        xi_y[:, j] = acc_o
        acc_g = phi @ acc_g
        acc_o = phi @ acc_o

    return FilterGains(N=N, L_N=L_N, Ltilde_N=Lt_N, P_N=P_N, M_N=M_N,
                       phi_inv_pow=phi_inv_pow, xi_u=xi_u, xi_y=xi_y,
                       rows_neg=rows_neg, warm_gain=M_N @ rows_neg.T,
                       cond_information=cond_p)


def batch_mhe_td(gains: FilterGains, ss: StateSpaceRealization,
                 noise: TDistribution, u_win: np.ndarray, y_win: np.ndarray,
                 s_start: np.ndarray, gaussian: bool = False):
    """Windowed batch estimate at the window's final instant.

    ``y_win`` holds the N window outputs, ``u_win`` the N-1 inputs
    driving the within-window s recursion, and ``s_start`` the s vector
    at the first window instant.  Returns ``(x_hat, y_hat)``.
    """
    N = gains.N
    y_win = np.asarray(y_win, dtype=float)
    u_win = np.asarray(u_win, dtype=float)
    if y_win.shape != (N,) or u_win.shape != (N - 1,):
        raise InsufficientData(
            f"window needs {N} outputs and {N - 1} inputs")
    phi = np.asarray(ss.phi)
    gam = np.asarray(ss.gamma)[:, 0]
    om = np.asarray(ss.omega)[:, 0]
    tf = (lambda r: r) if (gaussian or noise.is_gaussian) \
        else noise.psi_transform
    s = np.asarray(s_start, dtype=float).copy()
    W = np.empty(N)
    for k in range(N):
        W[k] = tf(y_win[k] - s[0])
        if k < N - 1:
            s = phi @ s + gam * u_win[k] + om * y_win[k]
    x_hat = s + gains.warm_gain @ W
    return x_hat, float(x_hat[0])


def batch_from_history(gains: FilterGains, ss: StateSpaceRealization,
                       noise: TDistribution, u: np.ndarray, y: np.ndarray,
                       t: int, gaussian: bool = False):
    """Batch estimate at 1-based time ``t`` from a full data record."""
    N = gains.N
    if t < N or t > len(y):
        raise InsufficientData(f"need N={N} <= t <= {len(y)}")
    phi = np.asarray(ss.phi)
    gam = np.asarray(ss.gamma)[:, 0]
    om = np.asarray(ss.omega)[:, 0]
    s = np.zeros(ss.n)
    for k in range(t - N):
        s = phi @ s + gam * u[k] + om * y[k]
    return batch_mhe_td(gains, ss, noise, u[t - N:t - 1], y[t - N:t],
                        s, gaussian=gaussian)


class MheTdFilter:
    """Recursive moving-horizon estimator with the robust residual map.

    Warm up with the first N samples (batch solve), then feed one
    ``(u_k, y_k)`` pair per step; each step returns the estimate at the
    new instant.  With Gaussian-mode noise the residual map is the
    identity and the filter is the moving-window least-squares
    estimator.
    """

    _force_gaussian = False

    def __init__(self, ss: StateSpaceRealization, noise: TDistribution,
                 N: int, anchor_every: Optional[int] = None):
        self.ss = ss
        self.noise = noise
        self.gains = compute_gains(ss, N)
        self._gaussian = noise.is_gaussian or self._force_gaussian
        # anchor_every=0 disables re-anchoring (pure recursion)
        self.anchor_every = 2 if anchor_every is None else anchor_every
        self._phi = np.asarray(ss.phi)
        self._gam = np.asarray(ss.gamma)[:, 0]
        self._om = np.asarray(ss.omega)[:, 0]
        self.t = 0
        self.x_hat = None
        self.s = None

    @property
    def N(self) -> int:
        return self.gains.N

    def _transform(self, r: float) -> float:
        return float(r) if self._gaussian else self.noise.psi_transform(r)

    def warm_up(self, u_first, y_first):
        """Initialize from exactly N samples; repeatable (resets state)."""
        N = self.N
        u_first = np.asarray(u_first, dtype=float)
        y_first = np.asarray(y_first, dtype=float)
        if u_first.shape != (N,) or y_first.shape != (N,):
            raise InsufficientData(f"warm-up needs exactly N={N} samples")
        s = np.zeros(self.ss.n)
        wbuf, hsbuf = [], []
        for k in range(N):
            hsbuf.append(s[0])
            wbuf.append(self._transform(y_first[k] - s[0]))
            if k < N - 1:
                s = self._phi @ s + self._gam * u_first[k] + self._om * y_first[k]
        self.s = s
        self.x_hat = s + self.gains.warm_gain @ np.asarray(wbuf)
        self._wbuf = wbuf
        self._hsbuf = hsbuf
        self._ubuf = list(u_first[:N - 1])
        self._ybuf = list(y_first[:N - 1])
        self._last_u = float(u_first[N - 1])
        self._last_y = float(y_first[N - 1])
        self._since_anchor = 0
        self.t = N
        return self

    def step(self, u: float, y: float):
        """Consume the next (u, y) pair; return (x_hat, y_hat) at that time."""
        if self.t == 0:
            raise NotWarmedUp("call warm_up with the first N samples first")
        g = self.gains
        delta = self.x_hat - self.s
        pred = self._phi @ self.x_hat + self._gam * self._last_u \
            + self._om * self._last_y
        self.s = self._phi @ self.s + self._gam * self._last_u \
            + self._om * self._last_y
        w_new = self._transform(y - self.s[0])
        removal = self._wbuf[0] - g.h_phi_inv @ delta
        self.x_hat = pred + g.L_N * (w_new + self.s[0] - pred[0]) \
            - g.Ltilde_N * removal
        self._wbuf.pop(0)
        self._wbuf.append(w_new)
        self._hsbuf.pop(0)
        self._hsbuf.append(self.s[0])
        if self.N > 1:
            self._ubuf.pop(0)
            self._ubuf.append(self._last_u)
            self._ybuf.pop(0)
            self._ybuf.append(self._last_y)
        self._since_anchor += 1
        if self.anchor_every and self._since_anchor >= self.anchor_every:
            self.x_hat = self.s + g.warm_gain @ np.asarray(self._wbuf)
            self._since_anchor = 0
        self._last_u = float(u)
        self._last_y = float(y)
        self.t += 1
        return self.x_hat.copy(), float(self.x_hat[0])

    @property
    def z_buffer(self) -> np.ndarray:
        """Buffered transformed measurements ``z_k = w_k + H s_k``."""
        return np.asarray(self._wbuf) + np.asarray(self._hsbuf)

    @property
    def u_buffer(self) -> np.ndarray:
        return np.asarray(self._ubuf)

    @property
    def y_buffer(self) -> np.ndarray:
        return np.asarray(self._ybuf)


class MwlseFilter(MheTdFilter):
    """Moving-window least squares: the estimator with raw residuals."""

    _force_gaussian = True


class ArmaxFilter:
    """Growing-memory variant: all past data, no removal term."""

    def __init__(self, ss: StateSpaceRealization, noise: TDistribution):
        self.ss = ss
        self.noise = noise
        self._gaussian = noise.is_gaussian
        self._phi = np.asarray(ss.phi)
        self._gam = np.asarray(ss.gamma)[:, 0]
        self._om = np.asarray(ss.omega)[:, 0]
        self.t = 0
        self.x_hat = None
        self.s = None

    def _transform(self, r: float) -> float:
        return float(r) if self._gaussian else self.noise.psi_transform(r)

    def warm_up(self, u_first, y_first):
        """Initialize from exactly n samples via the batch solve."""
        n = self.ss.n
        u_first = np.asarray(u_first, dtype=float)
        y_first = np.asarray(y_first, dtype=float)
        if u_first.shape != (n,) or y_first.shape != (n,):
            raise InsufficientData(f"warm-up needs exactly n={n} samples")
        gains = compute_gains(self.ss, n)
        s = np.zeros(n)
        W = np.empty(n)
        for k in range(n):
            W[k] = self._transform(y_first[k] - s[0])
            if k < n - 1:
                s = self._phi @ s + self._gam * u_first[k] + self._om * y_first[k]
        self.s = s
        self.x_hat = s + gains.warm_gain @ W
        self._rows = _pos_power_rows(self._phi, n)
        self._gram = self._rows.T @ self._rows
        self._row = self._rows[n - 1]
        self._phi_pow = _matrix_power(self._phi, n - 1)
        self._last_u = float(u_first[n - 1])
        self._last_y = float(y_first[n - 1])
        self.t = n
        return self

    def step(self, u: float, y: float):
        if self.t == 0:
            raise NotWarmedUp("call warm_up with the first n samples first")
        self._row = self._row @ self._phi
        self._phi_pow = self._phi_pow @ self._phi
        self._gram = self._gram + np.outer(self._row, self._row)
        L_t = self._phi_pow @ np.linalg.solve(self._gram, self._row)
        pred = self._phi @ self.x_hat + self._gam * self._last_u \
            + self._om * self._last_y
        self.s = self._phi @ self.s + self._gam * self._last_u \
            + self._om * self._last_y
        w_new = self._transform(y - self.s[0])
        self.x_hat = pred + L_t * (w_new + self.s[0] - pred[0])
        self._last_u = float(u)
        self._last_y = float(y)
        self.t += 1
        return self.x_hat.copy(), float(self.x_hat[0])


class KalmanFilter:
    """Correlated-noise Kalman filter (shared innovation drives both the
    state and the measurement), diffuse prior by default.

    ``step`` returns the filtered estimate, which for a diffuse prior
    coincides with the moving-window least-squares estimate using all
    data so far.
    """

    def __init__(self, ss: StateSpaceRealization, noise_variance: float,
                 prior_scale: float = 1e6):
        self.ss = ss
        self.r = float(noise_variance)
        n = ss.n
        self._phi_a = np.asarray(ss.phi_a)
        self._gam = np.asarray(ss.gamma)[:, 0]
        om = np.asarray(ss.omega)[:, 0]
        self._Q = self.r * np.outer(om, om)
        self._S = self.r * om
        self.x = np.zeros(n)          # one-step predictor state
        self.P = prior_scale * np.eye(n)
        self.t = 0

    def step(self, u: float, y: float):
        """Predict/update with the next pair; returns filtered (x_hat, y_hat)."""
        eps = float(y) - self.x[0]
        Re = self.P[0, 0] + self.r
        xf = self.x + self.P[:, 0] * (eps / Re)
        K = (self._phi_a @ self.P[:, 0] + self._S) / Re
        self.x = self._phi_a @ self.x + self._gam * float(u) + K * eps
        self.P = self._phi_a @ self.P @ self._phi_a.T + self._Q \
            - np.outer(K, K) * Re
        self.P = 0.5 * (self.P + self.P.T)
        self.t += 1
        return xf, float(xf[0])


# ---------------------------------------------------------------------------
# Whole-trajectory runners (kernel-backed; used by the Monte Carlo harness)
# ---------------------------------------------------------------------------

class MovingHorizonRunner:
    """Precomputed-gain driver for full-trajectory windowed filtering."""

    def __init__(self, ss: StateSpaceRealization, noise: TDistribution,
                 N: int, gaussian: bool = False,
                 anchor_every: Optional[int] = None, backend=None):
        self.gains = compute_gains(ss, N)
        self.N = N
        self.n = ss.n
        gaussian = gaussian or noise.is_gaussian
        self._args = (
            np.ascontiguousarray(ss.phi),
            np.ascontiguousarray(ss.gamma[:, 0]),
            np.ascontiguousarray(ss.omega[:, 0]),
            np.ascontiguousarray(self.gains.warm_gain),
            np.ascontiguousarray(self.gains.L_N),
            np.ascontiguousarray(self.gains.Ltilde_N),
            np.ascontiguousarray(self.gains.h_phi_inv),
            1 if gaussian else 0,
            0.0 if gaussian else noise.psi_scale,
            1.0 if gaussian else noise.sigma**2 * noise.nu,
            2 if anchor_every is None else anchor_every,
        )
        self._kernel = (backend or _kernels).moving_horizon_run

    def run(self, u: np.ndarray, y: np.ndarray):
        u = np.ascontiguousarray(u, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        T = len(y)
        xhat = np.empty((T, self.n))
        yhat = np.empty(T)
        self._kernel(u, y, *self._args, xhat, yhat)
        return xhat, yhat


class GrowingRunner:
    """Precomputed-gain driver for the growing-memory filter."""

    def __init__(self, ss: StateSpaceRealization, noise: TDistribution,
                 T_max: int, backend=None):
        n = ss.n
        phi = np.asarray(ss.phi)
        gains_n = compute_gains(ss, n)
        L_sched = np.zeros((T_max, n))
        rows = _pos_power_rows(phi, T_max)
        gram = rows[:n].T @ rows[:n]
        phi_pow = _matrix_power(phi, n - 1)
        for t in range(n, T_max):          # estimate at 0-based time t
            gram = gram + np.outer(rows[t], rows[t])
            phi_pow = phi_pow @ phi
            L_sched[t] = phi_pow @ np.linalg.solve(gram, rows[t])
        gaussian = noise.is_gaussian
        self.n = n
        self._args = (
            np.ascontiguousarray(phi),
            np.ascontiguousarray(ss.gamma[:, 0]),
            np.ascontiguousarray(ss.omega[:, 0]),
            np.ascontiguousarray(gains_n.warm_gain),
            np.ascontiguousarray(L_sched),
            1 if gaussian else 0,
            0.0 if gaussian else noise.psi_scale,
            1.0 if gaussian else noise.sigma**2 * noise.nu,
        )
        self.T_max = T_max
        self._kernel = (backend or _kernels).growing_run

    def run(self, u: np.ndarray, y: np.ndarray):
        u = np.ascontiguousarray(u, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        T = len(y)
        if T > self.T_max:
            raise InsufficientData(f"runner prepared for T <= {self.T_max}")
        xhat = np.empty((T, self.n))
        yhat = np.empty(T)
        self._kernel(u, y, *self._args, xhat, yhat)
        return xhat, yhat


class KalmanRunner:
    """Precomputed-gain driver for the diffuse-prior Kalman filter."""

    def __init__(self, ss: StateSpaceRealization, noise_variance: float,
                 T_max: int, prior_scale: float = 1e6, backend=None):
        n = ss.n
        phi_a = np.asarray(ss.phi_a)
        om = np.asarray(ss.omega)[:, 0]
        r = float(noise_variance)
        Q = r * np.outer(om, om)
        S = r * om
        P = prior_scale * np.eye(n)
        Kp = np.zeros((T_max, n))
        Kf = np.zeros((T_max, n))
        for k in range(T_max):
            Re = P[0, 0] + r
            Kf[k] = P[:, 0] / Re
            Kp[k] = (phi_a @ P[:, 0] + S) / Re
            P = phi_a @ P @ phi_a.T + Q - np.outer(Kp[k], Kp[k]) * Re
            P = 0.5 * (P + P.T)
        self.n = n
        self.T_max = T_max
        self._args = (
            np.ascontiguousarray(phi_a),
            np.ascontiguousarray(ss.gamma[:, 0]),
            np.ascontiguousarray(Kp),
            np.ascontiguousarray(Kf),
        )
        self._kernel = (backend or _kernels).kalman_run

    def run(self, u: np.ndarray, y: np.ndarray):
        u = np.ascontiguousarray(u, dtype=float)
        y = np.ascontiguousarray(y, dtype=float)
        T = len(y)
        if T > self.T_max:
            raise InsufficientData(f"runner prepared for T <= {self.T_max}")
        xhat = np.empty((T, self.n))
        yhat = np.empty(T)
        self._kernel(u, y, *self._args, xhat, yhat)
        return xhat, yhat
