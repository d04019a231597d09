"""Flat key=value configuration files with strict key checking.

Unknown keys are hard errors: a typo in a noise or window parameter
must never silently fall back to a default.  Lists are comma-separated;
``noise.nu=inf`` selects the exact Gaussian mode.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .armax import ArmaxModel, Polynomial
from .errors import ConfigError
from .noise import TDistribution

_ESTIMATOR_KINDS = ("mhe_td", "mwlse", "armax_filter", "kalman", "mle", "pf")
_RNG_NAMES = {"pcg64": np.random.PCG64, "philox": np.random.Philox}


def _parse_float(text: str) -> float:
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"expected a number, got {text!r}") from exc


def _parse_int(text: str) -> int:
    try:
        return int(text)
    except ValueError as exc:
        raise ConfigError(f"expected an integer, got {text!r}") from exc


def _parse_floats(text: str) -> tuple:
    return tuple(_parse_float(part) for part in text.split(","))


def _parse_ints(text: str) -> tuple:
    return tuple(_parse_int(part) for part in text.split(","))


_KEY_PARSERS = {
    "a.coeffs": _parse_floats,
    "b.coeffs": _parse_floats,
    "c.coeffs": _parse_floats,
    "noise.nu": _parse_float,
    "noise.sigma": _parse_float,
    "estimator.N": _parse_int,
    "estimator.kind": str,
    "pf.particles": _parse_ints,
    "pf.prior_scale": _parse_float,
    "seed": _parse_int,
    "rng": str,
    "T": _parse_int,
    "runs": _parse_int,
    "outlier.k": _parse_int,
    "outlier.value": _parse_float,
    "table.N": _parse_ints,
    "table.k": _parse_ints,
    "mle.horizon": str,
}


def read_config(path) -> dict:
    """Parse a key=value file; raises ConfigError on any unknown key."""
    values = {}
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _KEY_PARSERS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        values[key] = _KEY_PARSERS[key](value)
    return values


@dataclass
class RunSettings:
    """Everything a CLI run needs, assembled from a config file."""

    model: ArmaxModel
    seed: int = 0
    rng_name: str = "pcg64"
    T: int = 60
    runs: int = 1000
    estimator_kind: Optional[str] = None
    N: Optional[int] = None
    pf_particles: tuple = (100, 1000)
    pf_prior_scale: Optional[float] = None
    outlier: Optional[tuple] = None          # (k, value)
    table_N: tuple = (6, 9, 12)
    table_k: tuple = (6, 9, 12, 40, 60)
    mle_horizon: str = "window"

    def generator(self, seed: Optional[int] = None) -> np.random.Generator:
        bitgen = _RNG_NAMES[self.rng_name]
        return np.random.Generator(bitgen(self.seed if seed is None else seed))

    def spawn_seeds(self, count: int):
        """Deterministic per-run child seeds from the master seed."""
        return np.random.SeedSequence(self.seed).spawn(count)


def build_settings(values: dict) -> RunSettings:
    """Validate parsed key=value pairs into RunSettings."""
    for key in ("a.coeffs", "b.coeffs", "c.coeffs", "noise.nu", "noise.sigma"):
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    nu = values["noise.nu"]
    sigma = values["noise.sigma"]
    if not (nu > 0):
        raise ConfigError(f"noise.nu must be positive, got {nu}")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise ConfigError(f"noise.sigma must be positive, got {sigma}")
    try:
        model = ArmaxModel(a=Polynomial(values["a.coeffs"]),
                           b=Polynomial(values["b.coeffs"]),
                           c=Polynomial(values["c.coeffs"]),
                           noise=TDistribution(nu=nu, sigma=sigma))
    except Exception as exc:
        raise ConfigError(f"invalid model: {exc}") from exc

    settings = RunSettings(model=model)
    if "seed" in values:
        settings.seed = values["seed"]
    if "rng" in values:
        if values["rng"] not in _RNG_NAMES:
            raise ConfigError(
                f"rng must be one of {sorted(_RNG_NAMES)}, got {values['rng']!r}")
        settings.rng_name = values["rng"]
    if "T" in values:
        if values["T"] < 1:
            raise ConfigError("T must be >= 1")
        settings.T = values["T"]
    if "runs" in values:
        if values["runs"] < 1:
            raise ConfigError("runs must be >= 1")
        settings.runs = values["runs"]
    if "estimator.kind" in values:
        kind = values["estimator.kind"]
        if kind not in _ESTIMATOR_KINDS:
            raise ConfigError(
                f"estimator.kind must be one of {_ESTIMATOR_KINDS}, got {kind!r}")
        settings.estimator_kind = kind
    if "estimator.N" in values:
        if values["estimator.N"] < 1:
            raise ConfigError("estimator.N must be >= 1")
        settings.N = values["estimator.N"]
    if "pf.particles" in values:
        settings.pf_particles = values["pf.particles"]
    if "pf.prior_scale" in values:
        settings.pf_prior_scale = values["pf.prior_scale"]
    if ("outlier.k" in values) != ("outlier.value" in values):
        raise ConfigError("outlier.k and outlier.value must appear together")
    if "outlier.k" in values:
        settings.outlier = (values["outlier.k"], values["outlier.value"])
    if "table.N" in values:
        settings.table_N = values["table.N"]
    if "table.k" in values:
        settings.table_k = values["table.k"]
    if "mle.horizon" in values:
        if values["mle.horizon"] not in ("window", "full"):
            raise ConfigError("mle.horizon must be 'window' or 'full'")
        settings.mle_horizon = values["mle.horizon"]
    return settings


def load_settings(path) -> RunSettings:
    return build_settings(read_config(path))
