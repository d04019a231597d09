"""Student-t measurement-noise model and its robust residual transform.

The model is the zero-mean Student-t family ``t_nu(0, sigma)`` with an
exact Gaussian mode at ``nu = inf`` (a flag, not a large-float
surrogate, so Gaussian reductions hold to machine precision).

Two derived quantities drive the estimators:

* ``score_psi`` -- gradient of the negative log-density with respect to
  a linearly parameterized residual, the score stacked by the windowed
  likelihood solver.
* ``psi_transform`` -- the bounded residual map ``w = K r / (sigma^2 nu
  + r^2)`` used by the robust moving-horizon recursion.  ``K`` is the
  reciprocal of the expected score slope ``E[(sigma^2 nu - e^2) /
  (sigma^2 nu + e^2)^2]`` and reduces to ``(nu + 3) sigma^2`` in closed
  form; in Gaussian mode the transform is the identity.

``rho_moments`` evaluates the four noise moments entering the variance
formula by adaptive quadrature against an arbitrary actual-noise
density, with closed forms available for the matched case.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import NonFiniteVariance
from .quadrature import integrate_real_line

# Residuals beyond this magnitude would overflow r*r; the transform's
# true limit is 0 there.
_OVERFLOW_GUARD = 1e150


@dataclass(frozen=True)
class TDistribution:
    """Zero-mean Student-t noise ``t_nu(0, sigma)``; ``nu=inf`` is Gaussian."""

    nu: float
    sigma: float

    def __post_init__(self):
        if not (self.nu > 0.0):
            raise ValueError(f"nu must be positive, got {self.nu}")
        if not (self.sigma > 0.0 and math.isfinite(self.sigma)):
            raise ValueError(f"sigma must be positive and finite, got {self.sigma}")

    @property
    def is_gaussian(self) -> bool:
        return math.isinf(self.nu)

    @property
    def variance(self) -> float:
        """Noise variance sigma^2 nu/(nu-2); requires nu > 2 or Gaussian."""
        if self.is_gaussian:
            return self.sigma**2
        if self.nu <= 2.0:
            raise NonFiniteVariance(f"t_{self.nu} has no finite variance")
        return self.sigma**2 * self.nu / (self.nu - 2.0)

    @cached_property
    def _log_norm(self) -> float:
        # log of the density normalization constant
        if self.is_gaussian:
            return -0.5 * math.log(2.0 * math.pi) - math.log(self.sigma)
        return (math.lgamma(0.5 * (self.nu + 1.0))
                - math.lgamma(0.5 * self.nu)
                - 0.5 * math.log(self.nu * math.pi)
                - math.log(self.sigma))

    @cached_property
    def psi_scale(self) -> float:
        """Normalizer K of the residual transform: (nu+3) sigma^2.

        Unused in Gaussian mode, where the transform is the identity.
        """
        if self.is_gaussian:
            return self.sigma**2
        return (self.nu + 3.0) * self.sigma**2

    def pdf(self, e):
        """Density at ``e`` (scalar or array)."""
        return np.exp(self.logpdf(e))

    def logpdf(self, e):
        e = np.asarray(e, dtype=float)
        if self.is_gaussian:
            out = self._log_norm - 0.5 * (e / self.sigma) ** 2
        else:
            out = self._log_norm - 0.5 * (self.nu + 1.0) * np.log1p(
                e * e / (self.sigma**2 * self.nu))
        return out if out.ndim else float(out)

    def score_psi(self, regressor, e: float) -> np.ndarray:
        """Score -d ln f/d x for residual ``e = y - regressor @ x - const``.

        Returns ``-(nu+1) regressor' e / (sigma^2 nu + e^2)``; in
        Gaussian mode the limit ``-regressor' e / sigma^2``.
        """
        regressor = np.asarray(regressor, dtype=float).reshape(-1)
        if self.is_gaussian:
            return -regressor * (e / self.sigma**2)
        return -regressor * ((self.nu + 1.0) * e / (self.sigma**2 * self.nu + e * e))

    def psi_transform(self, residual: float) -> float:
        """Bounded residual map ``w = K r/(sigma^2 nu + r^2)``.

        Identity in Gaussian mode; decays to 0 for ``|r| -> inf`` with
        maximum ``(nu+3) sigma/(2 sqrt(nu))`` at ``r = sigma sqrt(nu)``.
        """
        if self.is_gaussian:
            return float(residual)
        r = float(residual)
        if abs(r) > _OVERFLOW_GUARD:
            return 0.0
        return self.psi_scale * r / (self.sigma**2 * self.nu + r * r)

    def psi_transform_bound(self) -> float:
        """Supremum of |psi_transform| over all residuals (finite nu)."""
        if self.is_gaussian:
            return math.inf
        return (self.nu + 3.0) * self.sigma / (2.0 * math.sqrt(self.nu))

    def sample(self, rng: np.random.Generator, size=None):
        """Draw from the distribution using the supplied generator."""
        if self.is_gaussian:
            return rng.normal(0.0, self.sigma, size=size)
        return self.sigma * rng.standard_t(self.nu, size=size)

    def tail_scale(self) -> float:
        """Natural width for real-line quadrature substitution."""
        return self.sigma * math.sqrt(self.nu) if not self.is_gaussian else self.sigma


@dataclass(frozen=True)
class NoiseMoments:
    """Expectations of the four score-related integrands under g(e).

    ``rho1 = E[((nu+1) e/(s2n + e^2))^2]``, ``rho2 = E[(nu+1) e^2/(s2n +
    e^2)]``, ``rho3 = E[e^2]``, ``rho4 = E[(nu+1)(s2n - e^2)/(s2n +
    e^2)^2]`` with ``s2n = sigma^2 nu`` taken from the design
    distribution and the expectation over the actual density g.
    """

    rho1: float
    rho2: float
    rho3: float
    rho4: float


def closed_form_moments(d: TDistribution) -> NoiseMoments:
    """Moments for the matched case g = f (actual equals design)."""
    if d.is_gaussian:
        v = d.sigma**2
        return NoiseMoments(rho1=1.0 / v, rho2=1.0, rho3=v, rho4=1.0 / v)
    if d.nu <= 2.0:
        raise NonFiniteVariance(f"t_{d.nu} has no finite variance")
    r14 = (d.nu + 1.0) / ((d.nu + 3.0) * d.sigma**2)
    return NoiseMoments(rho1=r14, rho2=1.0, rho3=d.variance, rho4=r14)


def rho_moments(design: TDistribution, actual: TDistribution,
                rel_tol: float = 1e-9) -> NoiseMoments:
    """Evaluate the four moments by adaptive quadrature.

    ``design`` supplies the (nu, sigma) inside the integrands;
    ``actual`` supplies the averaging density g.  Requires ``actual`` to
    have finite variance (nu > 2 or Gaussian mode).
    """
    if not actual.is_gaussian and actual.nu <= 2.0:
        raise NonFiniteVariance(
            f"actual noise t_{actual.nu} has no finite variance")

    g = actual.pdf
    scale = min(design.tail_scale(), actual.tail_scale())

    if design.is_gaussian:
        s2 = design.sigma**2

        def i1(e):
            return (e / s2) ** 2 * g(e)

        def i2(e):
            return e * e / s2 * g(e)

        def i4(e):
            return g(e) / s2
    else:
        s2n = design.sigma**2 * design.nu
        np1 = design.nu + 1.0

        def i1(e):
            return (np1 * e / (s2n + e * e)) ** 2 * g(e)

        def i2(e):
            return np1 * e * e / (s2n + e * e) * g(e)

        def i4(e):
            return np1 * (s2n - e * e) / (s2n + e * e) ** 2 * g(e)

    def i3(e):
        return e * e * g(e)

    return NoiseMoments(
        rho1=integrate_real_line(i1, scale=scale, rel_tol=rel_tol),
        rho2=integrate_real_line(i2, scale=scale, rel_tol=rel_tol),
        rho3=integrate_real_line(i3, scale=actual.tail_scale(), rel_tol=rel_tol),
        rho4=integrate_real_line(i4, scale=scale, rel_tol=rel_tol),
    )
