"""Kernel backend selection: compiled extension with pure-NumPy fallback.

The Cython extension ``_native`` is used when importable; setting the
environment variable ``MHETD_PURE=1`` forces the fallback (useful for
the parity tests and the benchmark).
"""
from __future__ import annotations

import os

from . import pure

if os.environ.get("MHETD_PURE"):
    _impl = pure
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = pure

BACKEND = _impl.BACKEND
moving_horizon_run = _impl.moving_horizon_run
growing_run = _impl.growing_run
kalman_run = _impl.kalman_run
particle_run = _impl.particle_run


def backends() -> dict:
    """All importable backends keyed by name (for tests/benchmarks)."""
    out = {"pure": pure}
    try:
        from . import _native
        out["native"] = _native
    except ImportError:
        pass
    return out
