"""Exhaustive checks of perfect b-Byzantine tolerance.

Two independent routes decide whether an allocation matrix guarantees that the
decoded sign always equals the true majority under any corruption of up to b
worker outputs:

* ``verify_lemma2`` checks the weight condition: for every binary message of
  weight floor(n/2), the number of workers voting 1 is at most floor(n/2) - b.
* ``verify_bruteforce`` runs every message through encode, the worst-case flip
  of b worker outputs, and decode.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import voting
from ._parallel import pmap, resolve_threads
from .allocation import AllocationMatrix

__all__ = [
    "LEMMA2_MAX_N",
    "BRUTEFORCE_MAX_N",
    "ToleranceError",
    "ToleranceReport",
    "verify",
    "verify_bruteforce",
    "verify_lemma2",
]

LEMMA2_MAX_N = 31
BRUTEFORCE_MAX_N = 15
_CHUNK = 1 << 14


class ToleranceError(ValueError):
    pass


@dataclass(frozen=True)
class ToleranceReport:
    n: int
    b: int
    verdict: bool
    witness: tuple[str, int] | None
    messages_checked: int
    method: str

    def __post_init__(self):
        if self.verdict != (self.witness is None):
            raise ToleranceError("a witness must be present exactly when the verdict is false")

    @property
    def witness_bits(self) -> str | None:
        return None if self.witness is None else self.witness[0]


def _bits_to_str(row) -> str:
    return "".join("1" if x else "0" for x in row)


def _combination_chunks(n: int, k: int):
    """Lexicographic weight-k binary messages of length n, in blocks."""
    combos = itertools.combinations(range(n), k)
    while True:
        block = list(itertools.islice(combos, _CHUNK))
        if not block:
            return
        idx = np.array(block, dtype=np.intp).reshape(len(block), k)
        bits = np.zeros((len(block), n), dtype=np.uint8)
        np.put_along_axis(bits, idx, 1, axis=1)
        yield bits


def verify_lemma2(G: AllocationMatrix, b: int, threads: int | None = None) -> ToleranceReport:
    """Weight-condition check over all C(n, floor(n/2)) messages.

    The first violating message in lexicographic order is the witness, paired
    with its count of workers voting 1. ``messages_checked`` stops at the
    witness when one is found.
    """
    n = G.n
    if n > LEMMA2_MAX_N:
        raise ToleranceError(f"n={n} exceeds the enumeration ceiling {LEMMA2_MAX_N}")
    if not 0 <= b < math.ceil(n / 2):
        raise ToleranceError(f"b must satisfy 0 <= b < ceil(n/2), got b={b}, n={n}")
    if not G.has_odd_rows():
        raise ToleranceError("the weight condition needs odd row weights")
    k = n // 2
    limit = k - b
    threads = resolve_threads(threads)

    def scan(bits):
        totals = voting.s_v_total(bits, G)
        bad = np.flatnonzero(totals > limit)
        if bad.size == 0:
            return None
        i = int(bad[0])
        return i, _bits_to_str(bits[i]), int(totals[i])

    checked = 0
    chunks = _combination_chunks(n, k)
    while True:
        batch = list(itertools.islice(chunks, threads))
        if not batch:
            break
        for bits, hit in zip(batch, pmap(scan, batch, threads)):
            if hit is not None:
                i, msg, count = hit
                return ToleranceReport(n, b, False, (msg, count), checked + i + 1, "lemma2")
            checked += len(bits)
    return ToleranceReport(n, b, True, None, checked, "lemma2")


def _worst_case_flip(c: np.ndarray, mu: np.ndarray, b: int) -> np.ndarray:
    """Flip the first b outputs that agree with the true majority ``mu``.

    This pushes the number of +1 votes as far as b flips can toward the wrong
    side, which is the extremal corruption.
    """
    agree = c == mu[:, None]
    rank = np.cumsum(agree, axis=1)
    flip = agree & (rank <= b)
    return np.where(flip, -c, c).astype(np.int8)


def verify_bruteforce(G: AllocationMatrix, b: int, threads: int | None = None) -> ToleranceReport:
    """Encode, attack and decode every one of the 2^n messages.

    Messages run in binary-counting order with partition 1 as the most
    significant bit. The witness carries the number of +1 votes in the
    uncorrupted codeword.
    """
    n = G.n
    if n > BRUTEFORCE_MAX_N:
        raise ToleranceError(f"n={n} exceeds the brute-force ceiling {BRUTEFORCE_MAX_N}")
    if not 0 <= b <= n:
        raise ToleranceError(f"b must satisfy 0 <= b <= n, got b={b}, n={n}")
    threads = resolve_threads(threads)
    shifts = np.arange(n - 1, -1, -1, dtype=np.int64)
    total = 1 << n

    def scan(start):
        codes = np.arange(start, min(start + _CHUNK, total), dtype=np.int64)
        bits = ((codes[:, None] >> shifts) & 1).astype(np.uint8)
        m = voting.from_binary(bits)
        mu = voting.decode(m)
        c = voting.encode(m, G)
        y = _worst_case_flip(c, mu, b)
        bad = np.flatnonzero(voting.decode(y) != mu)
        if bad.size == 0:
            return None
        i = int(bad[0])
        return i, _bits_to_str(bits[i]), int(np.count_nonzero(c[i] > 0))

    starts = list(range(0, total, _CHUNK))
    for start, hit in zip(starts, pmap(scan, starts, threads)):
        if hit is not None:
            i, msg, count = hit
            return ToleranceReport(n, b, False, (msg, count), start + i + 1, "bruteforce")
    return ToleranceReport(n, b, True, None, total, "bruteforce")


def verify(G: AllocationMatrix, b: int, method: str = "lemma2", threads: int | None = None) -> list[ToleranceReport]:
    """Run one or both verifiers; ``method`` is ``lemma2``, ``bruteforce`` or ``both``."""
    if method == "lemma2":
        return [verify_lemma2(G, b, threads)]
    if method == "bruteforce":
        return [verify_bruteforce(G, b, threads)]
    if method == "both":
        return [verify_lemma2(G, b, threads), verify_bruteforce(G, b, threads)]
    raise ToleranceError(f"unknown method {method!r}")
