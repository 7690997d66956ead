"""Closed-form error bounds for Bernoulli-coded majority voting.

Logarithms are natural. Every probability is clamped to [0, 1] so that a
vacuous bound reads 1 rather than a number above 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

__all__ = [
    "BoundInputs",
    "BoundsError",
    "Certificate",
    "certify_global_error",
    "conditional_local_error",
    "connection_factor",
    "gaussian_sign_error",
    "hoeffding_tail",
    "p_star",
    "q_star",
    "sign_error_bound",
    "snr",
    "theory_rate_bound",
]


class BoundsError(ValueError):
    pass


def _clamp(x: float) -> float:
    return min(1.0, max(0.0, x))


def snr(g: float, sigma: float, batch: int) -> float:
    """|g| / (sigma / sqrt(batch)); infinite for a noiseless oracle."""
    if sigma == 0:
        return math.inf if g != 0 else 0.0
    return abs(g) * math.sqrt(batch) / sigma


def _snr_factor(S: float) -> float:
    """S^2 / (2 (S^2 + 4)), with the S -> inf limit 1/2."""
    if math.isinf(S):
        return 0.5
    return S * S / (2.0 * (S * S + 4.0))


def p_star(n: float, C: float) -> float:
    """Minimum connection probability ``2 sqrt(C ln n / n)``, clamped to 1."""
    if n < 2:
        raise BoundsError(f"n must be >= 2, got {n}")
    if C <= 0:
        raise BoundsError(f"C must be positive, got {C}")
    return _clamp(2.0 * math.sqrt(C * math.log(n) / n))


def connection_factor(n: int, p: float) -> float:
    """Inverse of :func:`p_star`: the C for which ``p_star(n, C) == p``."""
    if n < 2:
        raise BoundsError(f"n must be >= 2, got {n}")
    return n * p * p / (4.0 * math.log(n))


def q_star(n: float, C: float, S: float) -> float:
    """Upper bound on an honest worker's local sign error under a Bernoulli code."""
    if n < 2:
        raise BoundsError(f"n must be >= 2, got {n}")
    if C <= 0:
        raise BoundsError(f"C must be positive, got {C}")
    if S < 0:
        raise BoundsError(f"S must be non-negative, got {S}")
    degree_arm = 2.0 / n ** (2.0 * C)
    vote_arm = math.exp(-math.sqrt(C * n * math.log(n)) * _snr_factor(S))
    return _clamp(2.0 * max(degree_arm, vote_arm))


def conditional_local_error(n_i: float, S: float) -> float:
    """Local sign error bound for a worker holding ``n_i`` partitions."""
    if n_i < 0:
        raise BoundsError(f"n_i must be non-negative, got {n_i}")
    return _clamp(math.exp(-n_i * _snr_factor(S)))


def hoeffding_tail(n: int, p: float, eps: float) -> float:
    """One-sided binomial tail bound: P[X - np >= n eps] <= exp(-2 eps^2 n).

    ``p`` does not enter the bound; it is validated for the caller's benefit.
    """
    if not 0 <= p <= 1:
        raise BoundsError(f"p must lie in [0, 1], got {p}")
    if eps <= 0:
        raise BoundsError(f"eps must be positive, got {eps}")
    if math.isinf(eps):
        return 0.0
    return _clamp(math.exp(-2.0 * eps * eps * n))


def sign_error_bound(S: float) -> float:
    """Distribution-free bound on P[sign(g~) != sign(g)] for symmetric unimodal noise."""
    if S < 0:
        raise BoundsError(f"S must be non-negative, got {S}")
    if S > 2.0 / math.sqrt(3.0):
        return 2.0 / (9.0 * S * S)
    return 0.5 - S / (2.0 * math.sqrt(3.0))


def gaussian_sign_error(S: float) -> float:
    """Exact sign error Phi(-S) for Gaussian noise."""
    return 0.5 * math.erfc(S / math.sqrt(2.0))


@dataclass(frozen=True)
class BoundInputs:
    n: int
    C: float
    S: float
    alpha: float
    delta: float

    def __post_init__(self):
        if self.n < 2:
            raise BoundsError(f"n must be >= 2, got {self.n}")
        if self.C <= 0:
            raise BoundsError(f"C must be positive, got {self.C}")
        if self.S < 0:
            raise BoundsError(f"S must be non-negative, got {self.S}")
        if not 0 <= self.alpha < 1:
            raise BoundsError(f"alpha must lie in [0, 1), got {self.alpha}")
        if not self.delta > 2:
            raise BoundsError(f"delta must exceed 2, got {self.delta}")


@dataclass(frozen=True)
class Certificate:
    """Outcome of the honest-fraction condition.

    When ``certified`` is true, the global sign error is below ``bound`` = 1/delta.
    ``vacuous`` flags u_min <= 1/2, where no Byzantine fraction can be certified.
    """

    certified: bool
    rhs: float
    bound: float
    u_min: float
    vacuous: bool


def certify_global_error(inp: BoundInputs) -> Certificate:
    u = 1.0 - q_star(inp.n, inp.C, inp.S)
    bound = 1.0 / inp.delta
    if u <= 0:
        return Certificate(False, math.inf, bound, u, True)
    t = math.log(inp.delta) / inp.n
    rhs = (math.sqrt(t) + math.sqrt(t + 4.0 * u)) ** 2 / (8.0 * u * u)
    vacuous = u <= 0.5
    certified = (not vacuous) and (1.0 - inp.alpha) > rhs
    return Certificate(certified, rhs, bound, u, vacuous)


def theory_rate_bound(l1_lipschitz: float, gamma: float, delta: float) -> float:
    """Right side of the averaged-gradient convergence guarantee, 3|L|_1 gamma / (2 (1 - 2/delta))."""
    if not delta > 2:
        raise BoundsError(f"delta must exceed 2, got {delta}")
    return 3.0 * l1_lipschitz * gamma / (2.0 * (1.0 - 2.0 / delta))
