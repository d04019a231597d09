"""Build the optional Cython fast path for the filter inner loops.

The package works without the extension (a pure-NumPy fallback is
selected at import time); the extension only accelerates the per-step
recursions that dominate Monte Carlo runtime.
"""
import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover - build dependency
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("MHETD_NO_EXTENSION"):
    directives = {
        "boundscheck": False,
        "wraparound": False,
        "cdivision": True,
        "language_level": "3",
    }
    ext_modules = cythonize(
        [Extension("mhetd._kernels._native", ["src/mhetd/_kernels/_native.pyx"])],
        compiler_directives=directives,
    )

setup(ext_modules=ext_modules)
