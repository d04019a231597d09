"""Bootstrap particle filter exploiting the shared-innovation structure.

For the innovation-form model the same noise drives state and
measurement, so conditioning on ``y_k`` makes the transition
deterministic: a particle is weighted by ``f(y_k - H x_k)`` and then
propagated through ``x+ = Phi_a x + Gamma u + Omega (y - H x)``.
Systematic resampling triggers when the effective sample size drops
below half the cloud.

``run_windowed`` re-initializes the cloud at a window start from a
diffuse Gaussian proposal around the measurement reconstruction ``s``
and sweeps the window; the cloud then samples the same moving-horizon
posterior that the windowed likelihood solver maximizes, which is what
makes particle counts comparable against that ground truth.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .armax import StateSpaceRealization
from .noise import TDistribution

ESS_FRACTION = 0.5


@dataclass
class ParticleCloud:
    """State hypotheses with normalized weights and an owned RNG stream."""

    particles: np.ndarray            # (P, n)
    log_weights: np.ndarray          # (P,)
    rng: np.random.Generator

    def __post_init__(self):
        if self.particles.ndim != 2 or self.particles.shape[0] < 1:
            raise ValueError("particles must be a (P, n) array with P >= 1")
        if self.log_weights.shape != (self.particles.shape[0],):
            raise ValueError("log_weights must have one entry per particle")

    @property
    def size(self) -> int:
        return self.particles.shape[0]

    @property
    def weights(self) -> np.ndarray:
        w = np.exp(self.log_weights - np.max(self.log_weights))
        return w / w.sum()

    @property
    def mean(self) -> np.ndarray:
        return self.weights @ self.particles


def make_cloud(center: np.ndarray, spread: float, P: int,
               rng: np.random.Generator) -> ParticleCloud:
    """Gaussian cloud of P particles around ``center``."""
    center = np.asarray(center, dtype=float)
    parts = center + spread * rng.standard_normal((P, center.size))
    return ParticleCloud(particles=parts, log_weights=np.zeros(P), rng=rng)


def _noise_kernel_params(noise: TDistribution):
    if noise.is_gaussian:
        return 1, 0.0, noise.sigma**2
    return 0, noise.nu, noise.sigma**2 * noise.nu


def particle_filter_step(cloud: ParticleCloud, ss: StateSpaceRealization,
                         noise: TDistribution, u: float, y: float,
                         backend=None):
    """One weight/estimate/resample/propagate cycle.

    Returns ``(cloud', x_hat)`` where ``x_hat`` is the weighted mean at
    the current instant; the returned cloud sits at the next instant.
    A fully degenerate weight vector (all underflowed) is reset to
    uniform with a warning.
    """
    kern = (backend or _kernels).particle_run
    gaussian, nu, s2n = _noise_kernel_params(noise)
    parts = np.ascontiguousarray(cloud.particles, dtype=float).copy()
    logw = np.ascontiguousarray(cloud.log_weights, dtype=float).copy()
    est = np.empty((1, parts.shape[1]))
    resample_u = cloud.rng.uniform(size=1)
    resets = kern(np.array([float(u)]), np.array([float(y)]),
                  np.ascontiguousarray(ss.phi),
                  np.ascontiguousarray(ss.gamma[:, 0]),
                  np.ascontiguousarray(ss.omega[:, 0]),
                  parts, logw, gaussian, nu, s2n, resample_u,
                  ESS_FRACTION, est)
    if resets:
        warnings.warn("particle weights degenerated; reset to uniform",
                      stacklevel=2)
    new_cloud = ParticleCloud(particles=parts, log_weights=logw,
                              rng=cloud.rng)
    return new_cloud, est[0]


def run_windowed(ss: StateSpaceRealization, noise: TDistribution,
                 u_win: np.ndarray, y_win: np.ndarray, s_start: np.ndarray,
                 P: int, rng: np.random.Generator,
                 prior_scale: float | None = None, backend=None):
    """Sweep a measurement window with a freshly initialized cloud.

    ``u_win``/``y_win`` are the window's W input/output pairs and
    ``s_start`` the measurement reconstruction at the first window
    instant.  Returns ``(estimates (W, n), resets)``; the last estimate
    row is the windowed particle estimate at the final instant.
    """
    kern = (backend or _kernels).particle_run
    gaussian, nu, s2n = _noise_kernel_params(noise)
    if prior_scale is None:
        prior_scale = 3.0 * noise.sigma
    W = len(y_win)
    n = ss.n
    parts = np.asarray(s_start, dtype=float) \
        + prior_scale * rng.standard_normal((P, n))
    logw = np.zeros(P)
    est = np.empty((W, n))
    resample_u = rng.uniform(size=W)
    resets = kern(np.ascontiguousarray(u_win, dtype=float),
                  np.ascontiguousarray(y_win, dtype=float),
                  np.ascontiguousarray(ss.phi),
                  np.ascontiguousarray(ss.gamma[:, 0]),
                  np.ascontiguousarray(ss.omega[:, 0]),
                  parts, logw, gaussian, nu, s2n, resample_u,
                  ESS_FRACTION, est)
    return est, resets
