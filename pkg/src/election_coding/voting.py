"""Hierarchical majority vote: local encoders at workers, global decoder at the master.

Sign vectors are integer arrays over {+1, -1}. Every function here vectorizes
over leading axes; the partition/worker axis is always the last one.
"""

from __future__ import annotations

import numpy as np

from .allocation import AllocationMatrix

__all__ = [
    "VotingError",
    "decode",
    "encode",
    "from_binary",
    "majority",
    "s_v_count",
    "s_v_total",
    "sign",
    "to_binary",
]


class VotingError(ValueError):
    pass


def sign(x) -> np.ndarray:
    """Elementwise sign with sign(0) = +1, as int8."""
    return np.where(np.asarray(x) >= 0, 1, -1).astype(np.int8)


def to_binary(m) -> np.ndarray:
    """Map +1 -> 1 and -1 -> 0."""
    m = np.asarray(m)
    _check_signs(m)
    return (m > 0).astype(np.uint8)


def from_binary(bits) -> np.ndarray:
    bits = np.asarray(bits)
    if np.any((bits != 0) & (bits != 1)):
        raise VotingError("binary vector entries must be 0 or 1")
    return np.where(bits == 1, 1, -1).astype(np.int8)


def _check_signs(m: np.ndarray) -> None:
    if np.any((m != 1) & (m != -1)):
        raise VotingError("sign vector entries must be +1 or -1")


def majority(m) -> np.ndarray:
    """Plain majority of a sign vector along the last axis (the uncoded vote)."""
    return decode(m)


def encode(m, G: AllocationMatrix, values=None) -> np.ndarray:
    """Local majority votes ``c_i = maj(m_j : j in P_i)``.

    A tie (only possible with an even row weight) resolves to the sign of the
    sum of ``values`` over the row's partitions when ``values`` is given (real
    gradients, same shape as ``m``), and to +1 otherwise.
    """
    m = np.asarray(m)
    if m.shape[-1] != G.n:
        raise VotingError(f"message length {m.shape[-1]} does not match n={G.n}")
    if np.any(G.row_weights == 0):
        empty = np.flatnonzero(G.row_weights == 0).tolist()
        raise VotingError(f"rows {empty} of the allocation matrix are empty")
    Gt = G.bits.T.astype(np.int64)
    tally = m.astype(np.int64) @ Gt
    c = sign(tally)
    if values is not None:
        ties = tally == 0
        if ties.any():
            sums = np.asarray(values, dtype=np.float64) @ Gt.astype(np.float64)
            c = np.where(ties, sign(sums), c).astype(np.int8)
    return c


def decode(y) -> np.ndarray:
    """Global majority: +1 iff more than floor(n/2) entries are +1.

    A vote with exactly floor(n/2) positive entries (possible only for even n)
    decodes to -1.
    """
    y = np.asarray(y)
    n = y.shape[-1]
    positives = np.count_nonzero(y > 0, axis=-1)
    out = np.where(positives > n // 2, 1, -1).astype(np.int8)
    return out if out.ndim else np.int8(out)


def _require_odd_rows(G: AllocationMatrix) -> None:
    if not G.has_odd_rows():
        even = np.flatnonzero(G.row_weights % 2 == 0).tolist()
        raise VotingError(f"S_v counts need odd row weights; rows {even} are even")


def s_v_count(m_bits, G: AllocationMatrix) -> dict[int, int]:
    """``|S_v(m)|`` for every v: weight-(2v-1) rows overlapping ``m`` in at least v places.

    ``m_bits`` is the binary view of a message. Keys run over v = 1..(n+1)//2.
    """
    _require_odd_rows(G)
    m_bits = np.asarray(m_bits, dtype=np.int64)
    if m_bits.shape != (G.n,):
        raise VotingError(f"expected a binary vector of length {G.n}")
    overlap = G.bits.astype(np.int64) @ m_bits
    weights = G.row_weights
    counts = {}
    for v in range(1, (G.n + 1) // 2 + 1):
        rows = weights == 2 * v - 1
        counts[v] = int(np.count_nonzero(rows & (overlap >= v)))
    return counts


def s_v_total(m_bits, G: AllocationMatrix) -> np.ndarray:
    """Sum over v of ``|S_v(m)|`` for a batch of binary messages (shape (..., n))."""
    _require_odd_rows(G)
    m_bits = np.asarray(m_bits, dtype=np.int64)
    overlap = m_bits @ G.bits.T.astype(np.int64)
    threshold = (G.row_weights + 1) // 2
    return np.count_nonzero(overlap >= threshold, axis=-1)
