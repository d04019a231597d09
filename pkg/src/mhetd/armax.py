"""SISO ARMAX models in observable-companion state-space form.

An ARMAX process ``A(q^-1) y = B(q^-1) u + C(q^-1) e`` with monic A, C
of equal degree ``n`` and strictly proper B is realized as

    x_{k+1} = Phi_a x_k + Gamma u_k + Omega e_k
    y_k     = H x_k + e_k

where ``Phi_a`` is the companion matrix of A (negated tail down the
first column, identity superdiagonal), ``Gamma`` stacks the B
coefficients, ``Omega = (c - a)`` and ``H = [1 0 ... 0]``.  The
innovation matrix ``Phi = Phi_a - Omega H`` is the companion matrix of
C and drives the measurement-based recursion ``s_{k+1} = Phi s_k +
Gamma u_k + Omega y_k``; with ``x_1 = 0`` the state equals ``s_k``
exactly, which is what makes the deterministic part of every estimator
here exactly reconstructible from past data.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import DegreeMismatch, DimensionMismatch, UnstableModel
from .noise import TDistribution

# Stability margin used when an estimator is built from the model.
_STABILITY_MARGIN = 1e-9


@dataclass(frozen=True)
class Polynomial:
    """Polynomial ``p0 + p1 q^-1 + ... + pm q^-m`` in the backward shift."""

    coeffs: tuple

    def __init__(self, coeffs: Sequence[float]):
        object.__setattr__(self, "coeffs", tuple(float(c) for c in coeffs))
        if not self.coeffs:
            raise DegreeMismatch("polynomial needs at least one coefficient")

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def tail(self, n: int) -> np.ndarray:
        """Coefficients p1..pn, zero-padded to length n."""
        out = np.zeros(n)
        t = self.coeffs[1:]
        if len(t) > n:
            raise DegreeMismatch(f"degree {len(t)} exceeds order {n}")
        out[:len(t)] = t
        return out

    def is_monic(self) -> bool:
        return self.coeffs[0] == 1.0

    def is_strictly_proper(self) -> bool:
        return self.coeffs[0] == 0.0


def companion(tail: np.ndarray) -> np.ndarray:
    """Companion matrix with ``-tail`` in the first column."""
    n = len(tail)
    M = np.zeros((n, n))
    M[:, 0] = -np.asarray(tail, dtype=float)
    for i in range(n - 1):
        M[i, i + 1] = 1.0
    return M


def spectral_radius(M: np.ndarray) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(M)))) if M.size else 0.0


@dataclass(frozen=True)
class ArmaxModel:
    """ARMAX model: monic A and C of order n, strictly proper B, t-noise.

    A and C are zero-padded to a common order; ``deg(B) <= n`` is
    required.  Stability (all zeros of A and C strictly inside the unit
    disc) is enforced when a state-space realization is built.
    """

    a: Polynomial
    b: Polynomial
    c: Polynomial
    noise: TDistribution

    def __post_init__(self):
        if not self.a.is_monic() or not self.c.is_monic():
            raise DegreeMismatch("A and C must have leading coefficient 1")
        if not self.b.is_strictly_proper():
            raise DegreeMismatch("B must have zero leading coefficient")
        n = self.order
        if n < 1:
            raise DegreeMismatch("model order must be at least 1")
        if self.b.degree > n:
            raise DegreeMismatch(
                f"deg(B)={self.b.degree} exceeds model order {n}")

    @property
    def order(self) -> int:
        return max(self.a.degree, self.c.degree)


@dataclass(frozen=True)
class StateSpaceRealization:
    """Companion-form matrices plus the innovation matrix Phi."""

    phi_a: np.ndarray
    gamma: np.ndarray
    omega: np.ndarray
    h: np.ndarray
    phi: np.ndarray

    @property
    def n(self) -> int:
        return self.phi_a.shape[0]

    def __post_init__(self):
        for arr in (self.phi_a, self.gamma, self.omega, self.h, self.phi):
            arr.setflags(write=False)


def build_state_space(model: ArmaxModel,
                      require_stable: bool = True) -> StateSpaceRealization:
    """Realize the model in observable-companion form.

    With ``require_stable`` (the estimator-construction default) a
    spectral radius of A or C at or above ``1 - 1e-9`` raises
    UnstableModel; otherwise it only warns, which suffices for
    simulation experiments.
    """
    n = model.order
    a_tail = model.a.tail(n)
    c_tail = model.c.tail(n)
    phi_a = companion(a_tail)
    phi = companion(c_tail)
    omega = (c_tail - a_tail).reshape(n, 1)
    h = np.zeros((1, n))
    h[0, 0] = 1.0
    gamma = model.b.tail(n).reshape(n, 1)

    for name, M in (("A", phi_a), ("C", phi)):
        rho = spectral_radius(M)
        if rho >= 1.0 - _STABILITY_MARGIN:
            msg = f"{name} polynomial has spectral radius {rho:.6f} >= 1"
            if require_stable:
                raise UnstableModel(msg)
            warnings.warn(msg, stacklevel=2)

    return StateSpaceRealization(phi_a=phi_a, gamma=gamma, omega=omega,
                                 h=h, phi=phi)


@dataclass(frozen=True)
class Trajectory:
    """Simulated input/output run; noise and latent state kept for tests."""

    u: np.ndarray
    y: np.ndarray
    e: np.ndarray
    x: np.ndarray

    def __len__(self) -> int:
        return len(self.y)


def simulate(model: ArmaxModel, T: int, rng: np.random.Generator,
             u: Optional[np.ndarray] = None,
             outliers: Optional[Sequence[tuple]] = None) -> Trajectory:
    """Simulate ``T`` steps from ``x_1 = 0``.

    ``outliers`` is a list of 1-based ``(k, value)`` pairs overriding
    the drawn noise at those instants.  Inputs default to zero.
    """
    if T < 1:
        raise DimensionMismatch(f"horizon must be >= 1, got {T}")
    ss = build_state_space(model, require_stable=False)
    n = ss.n
    if u is None:
        u = np.zeros(T)
    else:
        u = np.asarray(u, dtype=float)
        if u.shape != (T,):
            raise DimensionMismatch(f"u must have shape ({T},), got {u.shape}")
    e = np.asarray(model.noise.sample(rng, size=T), dtype=float)
    if outliers:
        for k, value in outliers:
            if not 1 <= k <= T:
                raise DimensionMismatch(
                    f"outlier index {k} outside 1..{T}")
            e[k - 1] = float(value)
    x = np.zeros((T, n))
    y = np.empty(T)
    xk = np.zeros(n)
    phi_a, gam, om = ss.phi_a, ss.gamma[:, 0], ss.omega[:, 0]
    for k in range(T):
        x[k] = xk
        y[k] = xk[0] + e[k]
        xk = phi_a @ xk + gam * u[k] + om * e[k]
    return Trajectory(u=u, y=y, e=e, x=x)


def propagate_s(ss: StateSpaceRealization, s: np.ndarray, u: float,
                y: float) -> np.ndarray:
    """One step of the measurement recursion ``Phi s + Gamma u + Omega y``."""
    s = np.asarray(s, dtype=float).reshape(-1)
    if s.shape != (ss.n,):
        raise DimensionMismatch(f"s must have shape ({ss.n},), got {s.shape}")
    return ss.phi @ s + ss.gamma[:, 0] * float(u) + ss.omega[:, 0] * float(y)


def s_sequence(ss: StateSpaceRealization, u: np.ndarray,
               y: np.ndarray) -> np.ndarray:
    """All s_1..s_T (s_1 = 0) for a full input/output record."""
    u = np.asarray(u, dtype=float)
    y = np.asarray(y, dtype=float)
    if u.shape != y.shape:
        raise DimensionMismatch("u and y must have equal length")
    T = len(y)
    s = np.zeros((T, ss.n))
    phi, gam, om = ss.phi, ss.gamma[:, 0], ss.omega[:, 0]
    for k in range(1, T):
        s[k] = phi @ s[k - 1] + gam * u[k - 1] + om * y[k - 1]
    return s
