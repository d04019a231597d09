"""Benchmark the compiled kernels against the pure-NumPy fallback.

Run with ``python -m mhetd.benchmark``.  Times the per-step cost of the
windowed robust filter and the particle sweep on the two reference
model sizes (scalar and fifth-order) for every importable backend.
"""
from __future__ import annotations

import time

import numpy as np

from ._kernels import backends
from .armax import ArmaxModel, Polynomial, build_state_space, simulate, s_sequence
from .estimators import MovingHorizonRunner
from .noise import TDistribution
from .particle import run_windowed


def _models():
    scalar = ArmaxModel(a=Polynomial([1.0, -0.9]), b=Polynomial([0.0, 1.0]),
                        c=Polynomial([1.0, -0.85]),
                        noise=TDistribution(nu=3.0, sigma=1.0))
    fifth_a = Polynomial(np.polynomial.polynomial.polypow([1.0, 0.855], 5))
    fifth_c = Polynomial(np.polynomial.polynomial.polypow([1.0, 0.8], 5))
    fifth = ArmaxModel(a=fifth_a, b=Polynomial([0.0, 0.1]), c=fifth_c,
                       noise=TDistribution(nu=3.0, sigma=0.5))
    return (("n=1 N=3", scalar, 3), ("n=5 N=6", fifth, 6))


def _time_us(fn, reps: int) -> float:
    fn()  # warm-up
    t0 = time.perf_counter()
    for _ in range(reps):
        fn()
    return (time.perf_counter() - t0) * 1e6 / reps


def main() -> None:
    rng = np.random.default_rng(0)
    rows = []
    for label, model, N in _models():
        ss = build_state_space(model)
        T = 500
        traj = simulate(model, T, rng)
        s = s_sequence(ss, traj.u, traj.y)
        for name, impl in backends().items():
            runner = MovingHorizonRunner(ss, model.noise, N, backend=impl)
            us = _time_us(lambda: runner.run(traj.u, traj.y), 20)
            rows.append((f"moving-horizon {label}", name, us / (T - N + 1)))
            for P in (100, 1000):
                prng = np.random.default_rng(1)
                us = _time_us(
                    lambda: run_windowed(ss, model.noise, traj.u[:N],
                                         traj.y[:N], s[0], P, prng,
                                         backend=impl), 20)
                rows.append((f"particle P={P} {label}", name, us / N))

    width = max(len(r[0]) for r in rows)
    print(f"{'kernel':<{width}}  backend  us/step")
    for kernel, name, us in rows:
        print(f"{kernel:<{width}}  {name:<7}  {us:8.2f}")
    ratios = {}
    for kernel, name, us in rows:
        ratios.setdefault(kernel, {})[name] = us
    if any("native" in v for v in ratios.values()):
        print("\nspeedup (pure / native):")
        for kernel, v in ratios.items():
            if "native" in v and "pure" in v:
                print(f"  {kernel:<{width}}  {v['pure'] / v['native']:6.1f}x")


if __name__ == "__main__":
    main()
