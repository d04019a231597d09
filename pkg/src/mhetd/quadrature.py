"""Adaptive Gauss-Kronrod quadrature, including whole-real-line integrals.

Heavy-tailed integrands (Student-t moments) defeat naive interval
truncation, so real-line integrals are mapped to a finite interval with
the substitution ``e = scale * tan(theta)``; with ``scale = sigma *
sqrt(nu)`` the t-density becomes a polynomial in ``cos(theta)`` and all
moment integrands are smooth on ``(-pi/2, pi/2)``.
"""
from __future__ import annotations

import math

from .errors import NoConvergence

# G7/K15 nodes on [-1, 1]: (node, Gauss weight, Kronrod weight).
_G7K15 = (
    (+0.991455371120813, 0.0, 0.022935322010529),
    (-0.991455371120813, 0.0, 0.022935322010529),
    (+0.949107912342759, 0.129484966168870, 0.063092092629979),
    (-0.949107912342759, 0.129484966168870, 0.063092092629979),
    (+0.864864423359769, 0.0, 0.104790010322250),
    (-0.864864423359769, 0.0, 0.104790010322250),
    (+0.741531185599394, 0.279705391489277, 0.140653259715525),
    (-0.741531185599394, 0.279705391489277, 0.140653259715525),
    (+0.586087235467691, 0.0, 0.169004726639267),
    (-0.586087235467691, 0.0, 0.169004726639267),
    (+0.405845151377397, 0.381830050505119, 0.190350578064785),
    (-0.405845151377397, 0.381830050505119, 0.190350578064785),
    (+0.207784955007898, 0.0, 0.204432940075298),
    (-0.207784955007898, 0.0, 0.204432940075298),
    (0.0, 0.417959183673469, 0.209482141084728),
)


def _gk15(f, a, b):
    """One G7/K15 panel on [a, b]; returns (K15 value, error estimate)."""
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    g7 = 0.0
    k15 = 0.0
    for x, wg, wk in _G7K15:
        fx = f(mid + half * x)
        g7 += wg * fx
        k15 += wk * fx
    err = abs(k15 - g7) * half
    # Standard QUADPACK-style sharpening of the raw G-K difference.
    err = (200.0 * err) ** 1.5 if err > 0.0 else 0.0
    return k15 * half, err


def integrate(f, a: float, b: float, rel_tol: float = 1e-9,
              abs_tol: float = 1e-12, max_panels: int = 512) -> float:
    """Adaptively integrate ``f`` over the finite interval [a, b].

    Bisects the panel with the largest error estimate until the summed
    error meets ``abs_tol + rel_tol * |integral|``.

    Raises
    ------
    NoConvergence
        If the tolerance is not met within ``max_panels`` panels.
    """
    val, err = _gk15(f, a, b)
    panels = [(err, a, b, val)]
    while True:
        total = math.fsum(p[3] for p in panels)
        total_err = math.fsum(p[0] for p in panels)
        if total_err <= abs_tol + rel_tol * abs(total):
            return total
        if len(panels) >= max_panels:
            raise NoConvergence(
                f"quadrature error {total_err:.3e} after {len(panels)} panels"
            )
        panels.sort(key=lambda p: p[0])
        _, pa, pb, _ = panels.pop()
        mid = 0.5 * (pa + pb)
        vl, el = _gk15(f, pa, mid)
        vr, er = _gk15(f, mid, pb)
        panels.append((el, pa, mid, vl))
        panels.append((er, mid, pb, vr))


def integrate_real_line(f, scale: float = 1.0, rel_tol: float = 1e-9,
                        abs_tol: float = 1e-12) -> float:
    """Integrate ``f`` over the whole real line via e = scale*tan(theta).

    ``scale`` should match the natural width of the integrand (for
    Student-t moments, ``sigma * sqrt(nu)``); the transformed integrand
    is then smooth up to the interval ends -- heavy-tail moment
    integrands approach finite endpoint values instead of diverging,
    which is what plain interval truncation gets wrong.
    """
    if scale <= 0.0:
        raise ValueError("scale must be positive")

    def g(theta):
        c = math.cos(theta)
        if c <= 1e-300:
            return 0.0
        t = math.tan(theta)
        return f(scale * t) * scale / (c * c)

    return integrate(g, -0.5 * math.pi, 0.5 * math.pi,
                     rel_tol=rel_tol, abs_tol=abs_tol)
