"""Data-allocation matrices: which worker computes which data partition.

Row ``i`` of an allocation matrix lists the partitions assigned to worker ``i``.
Three families are provided: the uncoded identity, the deterministic code that
perfectly tolerates ``b`` Byzantine workers, and random Bernoulli codes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Union

import numpy as np

__all__ = [
    "AllocationError",
    "AllocationMatrix",
    "CodeParams",
    "bernoulli_bits",
    "build_deterministic",
    "deterministic_layout",
    "from_text",
    "identity",
    "load",
    "redundancy",
    "sample_bernoulli",
    "theoretical_redundancy",
]


class AllocationError(ValueError):
    """Invalid allocation parameters or malformed matrix."""


@dataclass(frozen=True)
class CodeParams:
    """Design parameters for the two code families.

    ``C`` is the connection factor that sets ``p_star = 2 sqrt(C ln n / n)``.
    """

    n: int
    b: int | None = None
    p: float | None = None
    C: float | None = None

    def __post_init__(self):
        if self.n < 1:
            raise AllocationError(f"n must be positive, got {self.n}")
        if self.b is not None and not 0 < self.b < self.n // 2:
            raise AllocationError(f"b must satisfy 0 < b < floor(n/2), got b={self.b}, n={self.n}")
        if self.p is not None and not 0 < self.p <= 1:
            raise AllocationError(f"p must lie in (0, 1], got {self.p}")
        if self.C is not None and self.C <= 0:
            raise AllocationError(f"C must be positive, got {self.C}")


@dataclass(frozen=True, eq=False)
class AllocationMatrix:
    """Immutable n x n 0/1 matrix; entry (i, j) = 1 iff worker i holds partition j.

    ``kind`` is one of ``identity``, ``deterministic``, ``bernoulli`` or
    ``custom``; ``params`` carries the construction parameters (``b`` for the
    deterministic code, ``p``/``seed``/``redraws`` for Bernoulli codes).
    """

    bits: np.ndarray
    kind: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8, copy=True)
        if bits.ndim != 2 or bits.shape[0] != bits.shape[1] or bits.shape[0] < 1:
            raise AllocationError(f"allocation matrix must be square and non-empty, got shape {bits.shape}")
        if np.any(bits > 1):
            raise AllocationError("allocation matrix entries must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def n(self) -> int:
        return self.bits.shape[0]

    @property
    def row_weights(self) -> np.ndarray:
        return self.bits.sum(axis=1, dtype=np.int64)

    def partitions(self, i: int) -> list[int]:
        """Zero-based partition indices assigned to worker ``i``."""
        return np.flatnonzero(self.bits[i]).tolist()

    def has_odd_rows(self) -> bool:
        return bool(np.all(self.row_weights % 2 == 1))

    def redundancy(self) -> Fraction:
        return Fraction(int(self.bits.sum()), self.n)

    def to_text(self, header: bool = True) -> str:
        lines = []
        if header:
            lines.append(f"# {self.describe()}")
        lines.extend("".join("1" if x else "0" for x in row) for row in self.bits)
        return "\n".join(lines) + "\n"

    def describe(self) -> str:
        r = self.redundancy()
        parts = [f"kind={self.kind}", f"n={self.n}"]
        parts.extend(f"{k}={v}" for k, v in self.params.items())
        parts.append(f"r={_format_fraction(r)}")
        return " ".join(parts)

    def digest(self) -> str:
        """SHA-256 of the header-less text serialization."""
        return hashlib.sha256(self.to_text(header=False).encode("ascii")).hexdigest()

    def save(self, path: Union[str, Path]) -> None:
        Path(path).write_text(self.to_text(), encoding="ascii")

    def __eq__(self, other):
        if not isinstance(other, AllocationMatrix):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)

    def __hash__(self):
        return hash(self.bits.tobytes())


def _format_fraction(r: Fraction) -> str:
    if r.denominator == 1:
        return str(r.numerator)
    # terminating decimals print exactly, everything else as a ratio
    den = r.denominator
    for prime in (2, 5):
        while den % prime == 0:
            den //= prime
    if den == 1:
        return format(float(r), ".15g")
    return f"{r.numerator}/{r.denominator}"


def deterministic_layout(n: int, b: int) -> tuple[int, int]:
    """Return ``(s, L)``: the number of weight-1 rows and weight-(2b+1) rows."""
    if n < 3 or n % 2 == 0:
        raise AllocationError(f"deterministic code needs odd n >= 3, got n={n}")
    if not 0 < b < n // 2:
        raise AllocationError(f"b must satisfy 0 < b < floor(n/2), got b={b}, n={n}")
    s = (n - 1) // 2 - b
    L = (n - (2 * b + 1)) // (2 * (b + 1)) + 1
    if s + L > n:
        raise AllocationError(f"invalid (n, b) pair: s + L = {s + L} exceeds n = {n}")
    return s, L


def build_deterministic(n: int, b: int) -> AllocationMatrix:
    """Allocation matrix with perfect b-Byzantine tolerance.

    Layout (1-based rows): rows 1..s hold one partition each (identity block),
    rows s+1..s+L hold 2b+1 consecutive partitions from the trailing n-s
    columns with start offsets shifted by b+1, and the remaining rows hold
    every partition.
    """
    s, L = deterministic_layout(n, b)
    bits = np.zeros((n, n), dtype=np.uint8)
    bits[:s, :s] = np.eye(s, dtype=np.uint8)
    for l in range(L):
        start = s + l * (b + 1)
        stop = start + 2 * b + 1
        if stop > n:
            raise AllocationError(f"invalid (n, b) pair: row {s + l + 1} overflows the matrix")
        bits[s + l, start:stop] = 1
    bits[s + L:, :] = 1
    return AllocationMatrix(bits, kind="deterministic", params={"b": b})


def identity(n: int) -> AllocationMatrix:
    """The uncoded scheme: worker i computes partition i only."""
    if n < 1:
        raise AllocationError(f"n must be positive, got {n}")
    return AllocationMatrix(np.eye(n, dtype=np.uint8), kind="identity")


def bernoulli_bits(rng: np.random.Generator, shape: tuple[int, ...], p: float) -> tuple[np.ndarray, int]:
    """Draw iid Bernoulli(p) rows along the last axis, redrawing empty rows.

    Returns the boolean array and the number of row redraws performed.
    """
    if not 0 < p <= 1:
        raise AllocationError(f"p must lie in (0, 1], got {p}")
    bits = rng.random(shape) < p
    redraws = 0
    empty = ~bits.any(axis=-1)
    while empty.any():
        k = int(empty.sum())
        redraws += k
        bits[empty] = rng.random((k, shape[-1])) < p
        empty = ~bits.any(axis=-1)
    return bits, redraws


def sample_bernoulli(n: int, p: float, seed=None) -> AllocationMatrix:
    """Random code: every entry is an independent Bernoulli(p) draw.

    All-zero rows are redrawn until nonempty; ``params['redraws']`` records how
    many rows were redrawn and ``params['expected_r']`` is ``n * p``.
    """
    if n < 1:
        raise AllocationError(f"n must be positive, got {n}")
    if not 0 < p <= 1:
        raise AllocationError(f"p must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    bits, redraws = bernoulli_bits(rng, (n, n), p)
    params = {"p": p, "seed": seed, "redraws": redraws, "expected_r": n * p}
    return AllocationMatrix(bits.astype(np.uint8), kind="bernoulli", params=params)


def redundancy(G: AllocationMatrix) -> Fraction:
    """Average number of partitions per worker, as an exact fraction."""
    return G.redundancy()


def theoretical_redundancy(n: int, b: int) -> Fraction:
    """Closed-form redundancy of :func:`build_deterministic`."""
    deterministic_layout(n, b)
    k = n - (2 * b + 1)
    return Fraction(n + 2 * b + 1, 2) - (k // (2 * (b + 1)) + Fraction(1, 2)) * Fraction(k, n)


def from_text(text: str) -> AllocationMatrix:
    """Parse the one-row-per-line '0'/'1' format; '#' lines are metadata."""
    rows = []
    meta = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            for token in line[1:].split():
                if "=" in token:
                    key, _, value = token.partition("=")
                    meta[key] = value
            continue
        if set(line) - {"0", "1"}:
            raise AllocationError(f"line {lineno}: expected only '0'/'1' characters")
        rows.append([c == "1" for c in line])
    if not rows:
        raise AllocationError("matrix text contains no rows")
    if any(len(r) != len(rows) for r in rows):
        raise AllocationError(f"matrix must be square: {len(rows)} rows of lengths {sorted({len(r) for r in rows})}")
    kind = meta.get("kind", "custom")
    params = {}
    if kind == "deterministic" and "b" in meta:
        params["b"] = int(meta["b"])
    elif kind == "bernoulli" and "p" in meta:
        params["p"] = float(meta["p"])
    return AllocationMatrix(np.array(rows, dtype=np.uint8), kind=kind, params=params)


def load(path: Union[str, Path]) -> AllocationMatrix:
    return from_text(Path(path).read_text(encoding="ascii"))

