"""Simulated stochastic gradient oracle with symmetric unimodal noise.

A partition's mini-batch gradient is the true gradient plus the mean of
``batch`` iid zero-mean noise draws with standard deviation ``sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._parallel import pmap, spawn_generators, split_counts
from .bounds import snr

__all__ = [
    "NOISE_FAMILIES",
    "OracleConfig",
    "OracleError",
    "partition_noise",
    "sample_partition_gradient",
    "sign_error_rate",
]

NOISE_FAMILIES = ("gaussian", "laplace")
_BLOCK = 1 << 16
# laplace draws materialize batch samples per draw; keep blocks near this many floats
_LAPLACE_FLOATS = 1 << 22


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class OracleConfig:
    g: float
    sigma: float
    batch: int = 1
    noise: str = "gaussian"

    def __post_init__(self):
        if self.sigma < 0:
            raise OracleError(f"sigma must be non-negative, got {self.sigma}")
        if self.batch < 1:
            raise OracleError(f"batch must be >= 1, got {self.batch}")
        if self.noise not in NOISE_FAMILIES:
            raise OracleError(f"noise must be one of {NOISE_FAMILIES}, got {self.noise!r}")

    @property
    def snr(self) -> float:
        return snr(self.g, self.sigma, self.batch)


def partition_noise(rng: np.random.Generator, sigma: float, batch: int, noise: str, shape) -> np.ndarray:
    """Mean of ``batch`` iid zero-mean draws with std ``sigma``, for every cell of ``shape``.

    For Gaussian noise the mean is drawn directly from N(0, sigma^2 / batch),
    which has the same distribution.
    """
    shape = (int(shape),) if np.isscalar(shape) else tuple(shape)
    if sigma == 0:
        return np.zeros(shape)
    if noise == "gaussian":
        return rng.normal(0.0, sigma / math.sqrt(batch), size=shape)
    if noise == "laplace":
        return rng.laplace(0.0, sigma / math.sqrt(2.0), size=shape + (batch,)).mean(axis=-1)
    raise OracleError(f"unknown noise family {noise!r}")


def sample_partition_gradient(cfg: OracleConfig, rng: np.random.Generator, size=None):
    """One (or ``size``) partition mini-batch gradient(s) for ``cfg``."""
    if size is None:
        return float(cfg.g + partition_noise(rng, cfg.sigma, cfg.batch, cfg.noise, (1,))[0])
    return cfg.g + partition_noise(rng, cfg.sigma, cfg.batch, cfg.noise, size)


def _block_size(cfg: OracleConfig) -> int:
    if cfg.noise == "laplace":
        return max(1, min(_BLOCK, _LAPLACE_FLOATS // cfg.batch))
    return _BLOCK


def sign_error_rate(cfg: OracleConfig, trials: int, seed=0, threads: int | None = None) -> tuple[float, float]:
    """Empirical P[sign(g~) != sign(g)] and its normal-approximation standard error."""
    if cfg.g == 0:
        raise OracleError("sign error is undefined for a zero true gradient")
    if trials < 1:
        raise OracleError(f"trials must be >= 1, got {trials}")
    sizes = split_counts(trials, _block_size(cfg))
    rngs = spawn_generators(seed, len(sizes))
    true_sign = 1 if cfg.g > 0 else -1

    def block(args):
        rng, size = args
        draws = sample_partition_gradient(cfg, rng, size)
        return int(np.count_nonzero(np.where(draws >= 0, 1, -1) != true_sign))

    errors = sum(pmap(block, zip(rngs, sizes), threads))
    rate = errors / trials
    return rate, math.sqrt(rate * (1.0 - rate) / trials)
