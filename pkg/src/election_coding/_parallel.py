"""Thread-count resolution, ordered parallel map, and seeded RNG stream splitting.

Work is always cut into a fixed number of blocks that does not depend on the
thread count, and every block owns an RNG spawned from the master seed, so
results are identical at any parallelism level.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")
R = TypeVar("R")

THREADS_ENV = "ELECTION_CODING_THREADS"
SEED_ENV = "ELECTION_CODING_SEED"


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get(THREADS_ENV)
        threads = int(env) if env else (os.cpu_count() or 1)
    if threads < 1:
        raise ValueError(f"threads must be >= 1, got {threads}")
    return threads


def pmap(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    """Ordered map over ``items`` using up to ``threads`` worker threads."""
    items = list(items)
    threads = min(resolve_threads(threads), max(1, len(items)))
    if threads == 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


class OrderedPool:
    """Reusable ordered map; runs inline when one thread is requested."""

    def __init__(self, threads: int | None = None):
        self.threads = resolve_threads(threads)
        self._pool = ThreadPoolExecutor(max_workers=self.threads) if self.threads > 1 else None

    def map(self, fn: Callable[[T], R], items: Iterable[T]) -> list[R]:
        if self._pool is None:
            return [fn(x) for x in items]
        return list(self._pool.map(fn, items))

    def close(self) -> None:
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def spawn_generators(seed, count: int) -> list[np.random.Generator]:
    """``count`` independent generators split deterministically from ``seed``."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(child) for child in ss.spawn(count)]


def split_counts(total: int, block: int) -> list[int]:
    """Sizes of consecutive blocks of at most ``block`` covering ``total``."""
    full, rest = divmod(total, block)
    return [block] * full + ([rest] if rest else [])


def chunked(seq: Sequence[T], size: int) -> list[Sequence[T]]:
    return [seq[i:i + size] for i in range(0, len(seq), size)]
