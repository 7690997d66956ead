"""Byzantine corruption of worker outputs (sign domain, after local voting)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["MODELS", "AttackError", "AttackSpec", "apply_attack", "select_byzantine"]

MODELS = ("reverse", "directional", "oracle_reverse")


class AttackError(ValueError):
    pass


@dataclass(frozen=True)
class AttackSpec:
    """Which workers are Byzantine (0-based indices) and how they behave.

    ``direction`` is used by the directional model only; ``None`` means the
    all-ones direction (every Byzantine worker sends +1).
    """

    byzantine: tuple[int, ...] = ()
    model: str = "reverse"
    direction: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.model not in MODELS:
            raise AttackError(f"unknown attack model {self.model!r}; expected one of {MODELS}")
        byz = tuple(sorted(int(i) for i in self.byzantine))
        if len(set(byz)) != len(byz):
            raise AttackError("Byzantine indices must be distinct")
        object.__setattr__(self, "byzantine", byz)

    @property
    def b(self) -> int:
        return len(self.byzantine)

    def validate(self, n: int) -> None:
        if self.b > n:
            raise AttackError(f"{self.b} Byzantine workers exceed n={n}")
        if self.byzantine and (self.byzantine[0] < 0 or self.byzantine[-1] >= n):
            raise AttackError(f"Byzantine indices {self.byzantine} out of range for n={n}")


def select_byzantine(n: int, b: int, rng) -> tuple[int, ...]:
    """Uniform b-subset of workers, drawn without replacement."""
    if not 0 <= b <= n:
        raise AttackError(f"b must lie in [0, n], got b={b}, n={n}")
    rng = np.random.default_rng(rng)
    return tuple(sorted(int(i) for i in rng.choice(n, size=b, replace=False)))


def apply_attack(c, spec: AttackSpec, true_sign=None) -> np.ndarray:
    """Return the received vector y: honest outputs pass through unchanged.

    c has the worker axis last. For ``directional``, ``spec.direction``
    (default all +1) broadcasts against ``c[..., 0]``. For
    ``oracle_reverse``, Byzantine workers send ``-true_sign``, which must
    broadcast the same way.
    """
    c = np.asarray(c)
    spec.validate(c.shape[-1])
    y = c.astype(np.int8, copy=True)
    if not spec.byzantine:
        return y
    idx = list(spec.byzantine)
    if spec.model == "reverse":
        y[..., idx] = -y[..., idx]
    elif spec.model == "directional":
        direction = np.ones(c.shape[:-1], dtype=np.int8) if spec.direction is None else np.asarray(spec.direction, dtype=np.int8)
        y[..., idx] = np.broadcast_to(direction, c.shape[:-1])[..., None]
    else:
        if true_sign is None:
            raise AttackError("oracle_reverse needs the true gradient sign")
        ts = np.asarray(true_sign, dtype=np.int8)
        y[..., idx] = -np.broadcast_to(ts, c.shape[:-1])[..., None]
    return y
