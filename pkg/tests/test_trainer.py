import math

import numpy as np
import pytest

from election_coding import allocation, trainer
from election_coding.trainer import TrainConfig, TrainError


def task_for(cfg):
    setup = np.random.SeedSequence(cfg.seed).spawn(4)[0]
    return trainer.make_task(cfg, np.random.default_rng(setup))


def test_noiseless_loss_strictly_decreasing():
    cfg = TrainConfig(sigma=0.0, lr=0.001, steps=5)
    # stay above the closest optimum coordinate so no coordinate overshoots
    margin = np.abs(task_for(cfg).w_star).min()
    steps = int(margin / cfg.lr)
    tr = trainer.train(TrainConfig(sigma=0.0, lr=0.001, steps=steps))
    assert steps > 3
    assert all(a > b for a, b in zip(tr.loss, tr.loss[1:]))


@pytest.mark.parametrize("T", [1, 7, 50, 300, 2000])
def test_sign_descent_staircase(T):
    cfg = TrainConfig(sigma=0.0, lr=0.01, steps=T, seed=2)
    w_star = task_for(cfg).w_star
    w = trainer.train(cfg).final_w
    dist = np.abs(w - w_star)
    far = np.abs(w_star) > T * cfg.lr
    assert np.allclose(dist[far], np.abs(w_star[far]) - T * cfg.lr, atol=1e-9)
    assert np.all(dist[~far] <= cfg.lr + 1e-9)


def test_metric_decreases_with_T():
    metrics = [trainer.convergence_metric(trainer.train(TrainConfig(sigma=0.0, steps=T))) for T in (100, 400, 1600)]
    assert metrics[0] > metrics[1] > metrics[2]


@pytest.mark.parametrize("sigma", [0.0, 0.01])
@pytest.mark.parametrize("T", [100, 400, 1600])
def test_theory_schedule_under_rate_bound(sigma, T):
    # the tolerant code keeps every decoded sign equal to the honest majority
    cfg = TrainConfig(sigma=sigma, lr=None, steps=T, code="deterministic", attack="reverse", b=3, delta=100)
    tr = trainer.train(cfg)
    gap = tr.f0 - tr.f_star
    assert tr.lr == pytest.approx(math.sqrt(gap / (cfg.d * T)))
    assert trainer.convergence_metric(tr) <= trainer.theory_bound(tr, 100) * 1.01


def test_deterministic_code_bit_identical_under_attack():
    base = dict(task="quadratic", d=20, n=9, code="deterministic", code_b=3, steps=500, seed=7)
    clean = trainer.train(TrainConfig(**base))
    for attack in ["reverse", "directional", "oracle_reverse"]:
        hit = trainer.train(TrainConfig(**base, attack=attack, b=3))
        assert np.array_equal(hit.final_w, clean.final_w)
        assert hit.mu_digest == clean.mu_digest
        assert len(hit.manifest["byzantine"]) == 3


def test_divergence_guard():
    tr = trainer.train(TrainConfig(lr=1.0, steps=500, attack="directional", b=5))
    assert tr.diverged
    assert len(tr.steps) < 500
    assert trainer.convergence_metric(tr) > 1000


def test_thread_invariance_logistic_momentum():
    cfg = TrainConfig(task="logistic", d=10, samples=450, n=9, code="bernoulli", p=0.4, attack="reverse", b=2,
                      steps=60, momentum=0.9, batch=8, seed=5)
    a = trainer.train(cfg, threads=1)
    b = trainer.train(cfg, threads=8)
    assert a.mu_digest == b.mu_digest
    assert np.array_equal(a.final_w, b.final_w)


def test_samples_per_step_accounting():
    cfg = TrainConfig(n=9, code="deterministic", b=3, batch=16, batch_reduction=0.3, steps=1)
    tr = trainer.train(cfg)
    r = allocation.theoretical_redundancy(9, 3)
    assert cfg.effective_batch == 5
    assert tr.samples_per_step == pytest.approx(float(9 * r * 5))
    assert tr.effective_redundancy == pytest.approx(float(r) * 5 / 16)


def test_manifest_contents():
    tr = trainer.train(TrainConfig(task="logistic", d=5, samples=90, n=9, code="deterministic", b=2, attack="reverse", steps=3, seed=1))
    m = tr.manifest
    G = allocation.build_deterministic(9, 2)
    assert m["code"]["matrix_sha256"] == G.digest()
    assert m["code"]["r"] == pytest.approx(float(G.redundancy()))
    assert m["estimates"] == ["f_star", "l1_lipschitz"]
    assert len(tr.steps) == len(tr.loss) == len(tr.l1_grad) == len(tr.mu_digest) == 3


def test_running_average():
    tr = trainer.train(TrainConfig(steps=10))
    assert tr.running_l1[-1] == pytest.approx(trainer.convergence_metric(tr))


def test_logistic_coded_beats_uncoded_small():
    base = dict(task="logistic", d=20, samples=900, n=9, lr=0.01, steps=300, seed=3)
    coded = trainer.train(TrainConfig(**base, code="deterministic", attack="reverse", b=3))
    uncoded = trainer.train(TrainConfig(**base, attack="reverse", b=3))
    assert coded.final_loss < uncoded.final_loss


@pytest.mark.parametrize("kw", [
    dict(task="mnist"), dict(code="ldpc"), dict(attack="flip"), dict(steps=0), dict(batch_reduction=0.0),
    dict(lr=-1.0), dict(momentum=1.0), dict(b=10), dict(batch=0),
])
def test_config_validation(kw):
    with pytest.raises(TrainError):
        TrainConfig(**kw)


def test_too_few_samples():
    with pytest.raises(TrainError):
        trainer.train(TrainConfig(task="logistic", samples=5, n=9))


def test_empty_trace_metric():
    with pytest.raises(TrainError):
        trainer.convergence_metric(trainer.TrainTrace())
