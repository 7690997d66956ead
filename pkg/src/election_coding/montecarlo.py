"""Monte Carlo estimates of local and global sign error under coded voting.

Random streams are split from the master seed as follows: one stream selects
the Byzantine set, one draws the fixed code realization (when a single code is
deployed), and the trial blocks each own a child of a third stream. The trial
streams therefore do not depend on the attack, so attacked and unattacked runs
with the same seed see identical gradients and matrices trial by trial.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import allocation, bounds, voting
from ._parallel import pmap, split_counts
from .allocation import AllocationMatrix
from .attacks import AttackSpec, apply_attack, select_byzantine
from .oracle import OracleConfig, partition_noise

__all__ = [
    "CODES",
    "McConfig",
    "McError",
    "McResult",
    "estimate_global_error",
    "estimate_local_error",
    "global_trials",
    "run",
]

CODES = ("bernoulli", "deterministic", "identity")


class McError(ValueError):
    pass


@dataclass(frozen=True)
class McConfig:
    """One Monte Carlo setting.

    ``p`` is the Bernoulli connection probability (defaults to ``p_star(n, C)``),
    ``code_b`` the design parameter of the deterministic code, and ``b`` the
    number of Byzantine workers actually present. ``ensemble`` draws a fresh
    Bernoulli matrix for every trial; otherwise one realization is fixed.
    """

    n: int
    code: str = "bernoulli"
    oracle: OracleConfig = field(default_factory=lambda: OracleConfig(g=1.0, sigma=1.0, batch=1))
    b: int = 0
    attack: str = "oracle_reverse"
    p: float | None = None
    C: float = 1.0
    code_b: int | None = None
    ensemble: bool = True
    trials: int = 10_000
    max_trials: int | None = None
    delta: float = 100.0
    seed: int = 0

    def __post_init__(self):
        if self.code not in CODES:
            raise McError(f"code must be one of {CODES}, got {self.code!r}")
        if self.trials < 1:
            raise McError(f"trials must be >= 1, got {self.trials}")
        if not 0 <= self.b <= self.n:
            raise McError(f"b must lie in [0, n], got b={self.b}, n={self.n}")
        if self.oracle.g == 0:
            raise McError("the true gradient must be nonzero")

    @property
    def alpha(self) -> float:
        return self.b / self.n

    @property
    def connection_probability(self) -> float:
        if self.p is not None:
            return self.p
        return bounds.p_star(self.n, self.C)

    @property
    def design_b(self) -> int:
        return self.b if self.code_b is None else self.code_b


@dataclass(frozen=True)
class McResult:
    config: McConfig
    q_hat: float
    q_se: float
    P_hat: float
    P_se: float
    q_star: float | None
    certificate: bounds.Certificate | None
    trials: int
    byzantine: tuple[int, ...]


def _streams(seed, blocks: int):
    byz, fixed, trials = np.random.SeedSequence(seed).spawn(3)
    return (
        np.random.default_rng(byz),
        np.random.default_rng(fixed),
        [np.random.default_rng(s) for s in trials.spawn(blocks)],
    )


def _block_size(cfg: McConfig) -> int:
    if cfg.code == "bernoulli" and cfg.ensemble:
        return int(min(4096, max(64, (1 << 21) // (cfg.n * cfg.n))))
    return 4096


def fixed_matrix(cfg: McConfig, rng=None) -> AllocationMatrix:
    if cfg.code == "identity":
        return allocation.identity(cfg.n)
    if cfg.code == "deterministic":
        return allocation.build_deterministic(cfg.n, cfg.design_b)
    if rng is None:
        rng = _streams(cfg.seed, 1)[1]
    bits, redraws = allocation.bernoulli_bits(rng, (cfg.n, cfg.n), cfg.connection_probability)
    return AllocationMatrix(bits, kind="bernoulli", params={"p": cfg.connection_probability, "redraws": redraws})


def _partition_gradients(cfg: McConfig, rng, size: int) -> np.ndarray:
    o = cfg.oracle
    return o.g + partition_noise(rng, o.sigma, o.batch, o.noise, (size, cfg.n))


def _local_votes(rows: np.ndarray, grads: np.ndarray) -> np.ndarray:
    """Majority of partition signs over ``rows`` (same leading shape); ties use the gradient sum."""
    m = voting.sign(grads).astype(np.int64)
    tally = np.einsum("...ij,...j->...i", rows.astype(np.int64), m)
    sums = np.einsum("...ij,...j->...i", rows.astype(np.float64), grads)
    return np.where(tally == 0, voting.sign(sums), voting.sign(tally)).astype(np.int8)


def estimate_local_error(cfg: McConfig, threads: int | None = None) -> tuple[float, float]:
    """Fraction of trials where an honest worker's local vote misses sign(g).

    Ensemble Bernoulli mode draws a fresh matrix row per trial. With a fixed
    matrix, every worker votes in every trial and the per-trial fraction of
    wrong workers is averaged.
    """
    sizes = split_counts(cfg.trials, _block_size(cfg))
    _, fixed_rng, rngs = _streams(cfg.seed, len(sizes))
    true_sign = 1 if cfg.oracle.g > 0 else -1
    ensemble = cfg.code == "bernoulli" and cfg.ensemble
    G = None if ensemble else fixed_matrix(cfg, fixed_rng)
    p = cfg.connection_probability

    def block(args):
        rng, size = args
        if ensemble:
            rows, _ = allocation.bernoulli_bits(rng, (size, cfg.n), p)
            grads = _partition_gradients(cfg, rng, size)
            wrong = (_local_votes(rows[:, None, :], grads) != true_sign)[:, 0].astype(np.float64)
        else:
            grads = _partition_gradients(cfg, rng, size)
            votes = voting.encode(voting.sign(grads), G, values=grads)
            wrong = (votes != true_sign).mean(axis=1)
        return wrong.sum(), (wrong * wrong).sum()

    parts = pmap(block, zip(rngs, sizes), threads)
    total = sum(s for s, _ in parts)
    total_sq = sum(q for _, q in parts)
    N = cfg.trials
    mean = total / N
    var = max(0.0, total_sq / N - mean * mean)
    return float(mean), math.sqrt(var / N)


def global_trials(cfg: McConfig, threads: int | None = None) -> tuple[np.ndarray, np.ndarray, tuple[int, ...]]:
    """Per-trial true majority ``mu`` and decoded ``mu_hat``, plus the Byzantine set."""
    sizes = split_counts(cfg.trials, _block_size(cfg))
    byz_rng, fixed_rng, rngs = _streams(cfg.seed, len(sizes))
    spec = AttackSpec(select_byzantine(cfg.n, cfg.b, byz_rng), cfg.attack)
    true_sign = 1 if cfg.oracle.g > 0 else -1
    ensemble = cfg.code == "bernoulli" and cfg.ensemble
    G = None if ensemble else fixed_matrix(cfg, fixed_rng)
    p = cfg.connection_probability

    def block(args):
        rng, size = args
        if ensemble:
            mats, _ = allocation.bernoulli_bits(rng, (size, cfg.n, cfg.n), p)
            grads = _partition_gradients(cfg, rng, size)
            c = _local_votes(mats, grads)
        else:
            grads = _partition_gradients(cfg, rng, size)
            c = voting.encode(voting.sign(grads), G, values=grads)
        mu = voting.decode(voting.sign(grads))
        y = apply_attack(c, spec, true_sign=np.full(size, true_sign, dtype=np.int8))
        return mu, voting.decode(y)

    parts = pmap(block, zip(rngs, sizes), threads)
    mu = np.concatenate([a for a, _ in parts])
    mu_hat = np.concatenate([b for _, b in parts])
    return mu, mu_hat, spec.byzantine


def estimate_global_error(cfg: McConfig, threads: int | None = None) -> tuple[float, float]:
    """Fraction of trials where the decoded sign misses sign(g)."""
    _, mu_hat, _ = global_trials(cfg, threads)
    true_sign = 1 if cfg.oracle.g > 0 else -1
    rate = float(np.count_nonzero(mu_hat != true_sign)) / cfg.trials
    return rate, math.sqrt(rate * (1.0 - rate) / cfg.trials)


def _near(estimate: float, se: float, target: float) -> bool:
    return abs(estimate - target) < 2.0 * se


def run(cfg: McConfig, threads: int | None = None) -> McResult:
    """Estimate both errors and the matching bounds, escalating trials x10 near a bound.

    Escalation stops at ``max_trials`` (no escalation when unset).
    """
    S = cfg.oracle.snr
    q_bound = None
    cert = None
    if cfg.code == "bernoulli" and cfg.n >= 2:
        C = bounds.connection_factor(cfg.n, cfg.connection_probability)
        q_bound = bounds.q_star(cfg.n, C, S)
        cert = bounds.certify_global_error(bounds.BoundInputs(cfg.n, C, S, cfg.alpha, cfg.delta))
    while True:
        q_hat, q_se = estimate_local_error(cfg, threads)
        P_hat, P_se = estimate_global_error(cfg, threads)
        close = (q_bound is not None and _near(q_hat, q_se, q_bound)) or (
            cert is not None and cert.certified and _near(P_hat, P_se, cert.bound)
        )
        if not close or cfg.max_trials is None or cfg.trials * 10 > cfg.max_trials:
            break
        cfg = replace(cfg, trials=cfg.trials * 10)
    byzantine = select_byzantine(cfg.n, cfg.b, _streams(cfg.seed, 1)[0])
    return McResult(cfg, q_hat, q_se, P_hat, P_se, q_bound, cert, cfg.trials, byzantine)
