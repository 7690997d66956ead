"""Desk-scale coded SignSGD / Signum with majority vote on synthetic tasks.

Each step, every data partition draws a mini-batch and computes its gradient;
partitions keep their own momentum buffer (Signum) and contribute its sign.
Workers majority-vote the partitions assigned to them, Byzantine workers
corrupt their outputs, and the master majority-decodes one sign per
coordinate and takes a fixed-size step against it.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import allocation, bounds, voting
from ._parallel import OrderedPool
from .allocation import AllocationMatrix
from .attacks import AttackSpec, apply_attack, select_byzantine
from .oracle import partition_noise

__all__ = [
    "TASKS",
    "TrainConfig",
    "TrainError",
    "TrainTrace",
    "build_code",
    "convergence_metric",
    "make_task",
    "train",
]

TASKS = ("quadratic", "logistic")
ATTACKS = ("none", "reverse", "directional", "oracle_reverse")
CODES = ("identity", "deterministic", "bernoulli")


class TrainError(ValueError):
    pass


@dataclass(frozen=True)
class TrainConfig:
    """Every knob of a training run.

    ``b`` is the number of Byzantine workers present; ``code_b`` is the
    deterministic code's design parameter (defaults to ``b``). ``lr`` is a
    fixed step size, or ``None`` for the theory schedule
    sqrt((f(w0) - f*) / (|L|_1 T)). ``batch_reduction`` shrinks each
    partition's batch to ceil(rho * batch).
    """

    task: str = "quadratic"
    d: int = 20
    samples: int = 1800
    label_noise: float = 0.1
    sigma: float = 1.0
    noise: str = "gaussian"
    n: int = 9
    code: str = "identity"
    code_b: int | None = None
    p: float | None = None
    C: float = 1.0
    attack: str = "none"
    b: int = 0
    steps: int = 500
    lr: float | None = 0.01
    momentum: float = 0.0
    batch: int = 16
    batch_reduction: float = 1.0
    delta: float | None = None
    divergence: float = 1e6
    seed: int = 0

    def __post_init__(self):
        if self.task not in TASKS:
            raise TrainError(f"task must be one of {TASKS}, got {self.task!r}")
        if self.code not in CODES:
            raise TrainError(f"code must be one of {CODES}, got {self.code!r}")
        if self.attack not in ATTACKS:
            raise TrainError(f"attack must be one of {ATTACKS}, got {self.attack!r}")
        if self.steps < 1:
            raise TrainError(f"steps must be >= 1, got {self.steps}")
        if not 0 < self.batch_reduction <= 1:
            raise TrainError(f"batch_reduction must lie in (0, 1], got {self.batch_reduction}")
        if self.lr is not None and self.lr <= 0:
            raise TrainError(f"lr must be positive, got {self.lr}")
        if not 0 <= self.momentum < 1:
            raise TrainError(f"momentum must lie in [0, 1), got {self.momentum}")
        if self.batch < 1 or self.d < 1 or self.n < 1:
            raise TrainError("batch, d and n must be positive")
        if not 0 <= self.b <= self.n:
            raise TrainError(f"b must lie in [0, n], got b={self.b}, n={self.n}")

    @property
    def effective_batch(self) -> int:
        return math.ceil(self.batch_reduction * self.batch)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class TrainTrace:
    steps: list[int] = field(default_factory=list)
    loss: list[float] = field(default_factory=list)
    l1_grad: list[float] = field(default_factory=list)
    mu_digest: list[str] = field(default_factory=list)
    final_loss: float = math.nan
    final_w: np.ndarray | None = None
    diverged: bool = False
    lr: float = math.nan
    l1_lipschitz: float = math.nan
    f0: float = math.nan
    f_star: float = math.nan
    samples_per_step: int = 0
    redundancy: float = 1.0
    effective_redundancy: float = 1.0
    manifest: dict = field(default_factory=dict)

    @property
    def running_l1(self) -> np.ndarray:
        """Running average of the full-gradient l1 norm."""
        g = np.asarray(self.l1_grad)
        return np.cumsum(g) / np.arange(1, len(g) + 1)


class _Quadratic:
    """f(w) = 1/2 sum_k L_k (w_k - w*_k)^2 with unit curvature."""

    def __init__(self, cfg: TrainConfig, rng: np.random.Generator):
        self.d = cfg.d
        self.w_star = rng.normal(size=cfg.d)
        self.curvature = np.ones(cfg.d)
        self.sigma = cfg.sigma
        self.noise = cfg.noise
        self.f_star = 0.0
        self.f_star_exact = True
        self.l1_lipschitz = float(self.curvature.sum())

    def loss(self, w):
        return 0.5 * float(np.sum(self.curvature * (w - self.w_star) ** 2))

    def grad(self, w):
        return self.curvature * (w - self.w_star)

    def partition_grad(self, j, w, rng, batch):
        return self.grad(w) + partition_noise(rng, self.sigma, batch, self.noise, (self.d,))


class _Logistic:
    """Mean logistic loss on standard-normal features and a planted separator."""

    def __init__(self, cfg: TrainConfig, rng: np.random.Generator):
        self.d = cfg.d
        X = rng.normal(size=(cfg.samples, cfg.d))
        w_true = rng.normal(size=cfg.d)
        y = np.where(X @ w_true >= 0, 1.0, -1.0)
        flip = rng.random(cfg.samples) < cfg.label_noise
        y[flip] = -y[flip]
        self.X, self.y = X, y
        self.parts = np.array_split(np.arange(cfg.samples), cfg.n)
        if min(len(p) for p in self.parts) == 0:
            raise TrainError(f"{cfg.samples} samples cannot fill {cfg.n} partitions")
        self.f_star = 0.0
        self.f_star_exact = False
        self.l1_lipschitz = 0.25 * float(np.mean(np.sum(X * X, axis=1)))

    def _loss_grad(self, X, y, w):
        z = y * (X @ w)
        loss = float(np.mean(np.logaddexp(0.0, -z)))
        weight = -y * 0.5 * (1.0 - np.tanh(z / 2.0))
        return loss, X.T @ weight / len(y)

    def loss(self, w):
        return self._loss_grad(self.X, self.y, w)[0]

    def grad(self, w):
        return self._loss_grad(self.X, self.y, w)[1]

    def partition_grad(self, j, w, rng, batch):
        part = self.parts[j]
        take = rng.choice(len(part), size=batch, replace=batch > len(part))
        idx = part[take]
        return self._loss_grad(self.X[idx], self.y[idx], w)[1]


def make_task(cfg: TrainConfig, rng: np.random.Generator):
    return _Quadratic(cfg, rng) if cfg.task == "quadratic" else _Logistic(cfg, rng)


def build_code(cfg: TrainConfig, rng: np.random.Generator) -> AllocationMatrix:
    if cfg.code == "identity":
        return allocation.identity(cfg.n)
    if cfg.code == "deterministic":
        return allocation.build_deterministic(cfg.n, cfg.b if cfg.code_b is None else cfg.code_b)
    p = cfg.p if cfg.p is not None else bounds.p_star(cfg.n, cfg.C)
    bits, redraws = allocation.bernoulli_bits(rng, (cfg.n, cfg.n), p)
    return AllocationMatrix(bits, kind="bernoulli", params={"p": p, "redraws": redraws})


def _digest(mu: np.ndarray) -> str:
    return hashlib.sha256(np.ascontiguousarray(mu, dtype=np.int8).tobytes()).hexdigest()[:16]


def train(cfg: TrainConfig, threads: int | None = None) -> TrainTrace:
    setup_ss, byz_ss, code_ss, part_ss = np.random.SeedSequence(cfg.seed).spawn(4)
    task = make_task(cfg, np.random.default_rng(setup_ss))
    G = build_code(cfg, np.random.default_rng(code_ss))
    byz = select_byzantine(cfg.n, cfg.b if cfg.attack != "none" else 0, np.random.default_rng(byz_ss))
    spec = AttackSpec(byz, "reverse" if cfg.attack == "none" else cfg.attack)
    part_rngs = [np.random.default_rng(s) for s in part_ss.spawn(cfg.n)]

    w = np.zeros(cfg.d)
    f0 = task.loss(w)
    if cfg.lr is None:
        gap = max(f0 - task.f_star, 0.0)
        lr = math.sqrt(gap / (task.l1_lipschitz * cfg.steps))
        if lr <= 0:
            raise TrainError("theory schedule gives a zero step: f(w0) is already optimal")
    else:
        lr = cfg.lr
    batch = cfg.effective_batch
    r = float(G.redundancy())

    trace = TrainTrace(
        lr=lr,
        l1_lipschitz=task.l1_lipschitz,
        f0=f0,
        f_star=task.f_star,
        samples_per_step=int(G.bits.sum()) * batch,
        redundancy=r,
        effective_redundancy=r * batch / cfg.batch,
    )
    trace.manifest = {
        "seed": cfg.seed,
        "byzantine": list(byz),
        "code": {"kind": G.kind, "r": r, "matrix_sha256": G.digest(), "matrix": G.to_text(header=False).split()},
        "lr": lr,
        "l1_lipschitz": task.l1_lipschitz,
        "f_star": task.f_star,
        "estimates": [] if task.f_star_exact else ["f_star", "l1_lipschitz"],
    }

    momentum = np.zeros((cfg.n, cfg.d)) if cfg.momentum > 0 else None
    with OrderedPool(threads) as pool:
        for t in range(cfg.steps):
            loss = task.loss(w)
            full = task.grad(w)
            if not math.isfinite(loss) or loss > cfg.divergence:
                trace.diverged = True
                break
            grads = np.stack(pool.map(lambda j: task.partition_grad(j, w, part_rngs[j], batch), range(cfg.n)))
            if momentum is not None:
                momentum = cfg.momentum * momentum + (1.0 - cfg.momentum) * grads
                grads = momentum
            # coordinates on the leading axis, partitions/workers on the last
            values = grads.T
            c = voting.encode(voting.sign(values), G, values=values)
            y = apply_attack(c, spec, true_sign=voting.sign(full))
            mu_hat = voting.decode(y)
            trace.steps.append(t)
            trace.loss.append(loss)
            trace.l1_grad.append(float(np.abs(full).sum()))
            trace.mu_digest.append(_digest(mu_hat))
            w = w - lr * mu_hat
    trace.final_w = w
    trace.final_loss = task.loss(w)
    if not math.isfinite(trace.final_loss) or trace.final_loss > cfg.divergence:
        trace.diverged = True
    return trace


def convergence_metric(trace: TrainTrace) -> float:
    """Average full-gradient l1 norm over the recorded steps."""
    if not trace.l1_grad:
        raise TrainError("empty trace")
    return float(np.mean(trace.l1_grad))


def theory_bound(trace: TrainTrace, delta: float) -> float:
    """Averaged-gradient guarantee for the run's step size and smoothness constant."""
    return bounds.theory_rate_bound(trace.l1_lipschitz, trace.lr, delta)
