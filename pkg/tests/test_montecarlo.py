import math
from dataclasses import replace

import numpy as np
import pytest

from election_coding import bounds, montecarlo
from election_coding.montecarlo import McConfig, McError
from election_coding.oracle import OracleConfig

S128 = math.sqrt(128)


def test_noiseless_local_error_is_zero():
    cfg = McConfig(n=15, oracle=OracleConfig(1.0, 0.0), trials=2000)
    assert montecarlo.estimate_local_error(cfg) == (0.0, 0.0)


def test_noiseless_identity_no_attack_global_error_zero():
    cfg = McConfig(n=9, code="identity", oracle=OracleConfig(1.0, 0.0), b=0, trials=1000)
    assert montecarlo.estimate_global_error(cfg) == (0.0, 0.0)


def test_identity_local_error_is_phi():
    cfg = McConfig(n=5, code="identity", oracle=OracleConfig(1.0, 1.0), trials=40_000, seed=2)
    q, se = montecarlo.estimate_local_error(cfg)
    assert abs(q - bounds.gaussian_sign_error(1.0)) < 3 * se


def test_sparse_bernoulli_close_to_single_draw():
    # p = 1/n gives about one partition per worker; extra partitions only help
    cfg = McConfig(n=25, p=1 / 25, oracle=OracleConfig(1.0, 1.0), trials=40_000, seed=3)
    q, se = montecarlo.estimate_local_error(cfg)
    phi = bounds.gaussian_sign_error(1.0)
    assert q <= phi + 3 * se
    assert q > 0.5 * phi


def test_local_error_under_q_star():
    cfg = McConfig(n=40, oracle=OracleConfig(1.0, 1.0, batch=128), b=8, trials=20_000, seed=1)
    q, se = montecarlo.estimate_local_error(cfg)
    assert q <= bounds.q_star(40, 1, S128) + 3 * se


@pytest.mark.parametrize("n,b", [(7, 2), (9, 3), (11, 4)])
def test_deterministic_code_matches_unattacked_per_trial(n, b):
    base = McConfig(n=n, code="deterministic", code_b=b, oracle=OracleConfig(0.3, 1.0, batch=2), b=b, attack="reverse", trials=5000, seed=4)
    for attack in ["reverse", "directional", "oracle_reverse"]:
        mu, mu_hat, byz = montecarlo.global_trials(replace(base, attack=attack))
        assert len(byz) == b
        assert np.array_equal(mu, mu_hat)
    _, clean, _ = montecarlo.global_trials(replace(base, b=0))
    _, attacked, _ = montecarlo.global_trials(base)
    assert np.array_equal(clean, attacked)


def test_identity_breaks_under_attack():
    cfg = McConfig(n=9, code="identity", oracle=OracleConfig(0.3, 1.0), b=3, attack="oracle_reverse", trials=5000)
    P, _ = montecarlo.estimate_global_error(cfg)
    P0, _ = montecarlo.estimate_global_error(replace(cfg, b=0))
    assert P > P0 + 0.1


def test_fixed_realization_mode():
    cfg = McConfig(n=21, oracle=OracleConfig(1.0, 1.0, batch=4), ensemble=False, trials=3000, seed=6)
    q, se = montecarlo.estimate_local_error(cfg)
    assert 0 <= q < 0.05
    assert montecarlo.fixed_matrix(cfg) == montecarlo.fixed_matrix(cfg)


def test_thread_invariance():
    cfg = McConfig(n=40, oracle=OracleConfig(0.1, 1.0, batch=2), b=8, trials=3000, seed=8)
    a = montecarlo.run(cfg, threads=1)
    b = montecarlo.run(cfg, threads=8)
    assert (a.q_hat, a.P_hat, a.byzantine) == (b.q_hat, b.P_hat, b.byzantine)


def test_run_reports_bounds_for_bernoulli_only():
    res = montecarlo.run(McConfig(n=40, oracle=OracleConfig(1.0, 1.0, batch=128), b=8, trials=2000))
    assert res.q_star == pytest.approx(bounds.q_star(40, 1, S128))
    assert res.certificate.certified
    res = montecarlo.run(McConfig(n=9, code="deterministic", b=3, trials=500))
    assert res.q_star is None and res.certificate is None


def test_escalation_respects_ceiling(monkeypatch):
    monkeypatch.setattr(montecarlo, "_near", lambda *a: True)
    cfg = McConfig(n=15, oracle=OracleConfig(1.0, 1.0), trials=100, max_trials=20_000)
    assert montecarlo.run(cfg).trials == 10_000
    assert montecarlo.run(replace(cfg, max_trials=None)).trials == 100


def test_no_escalation_far_from_bounds():
    cfg = McConfig(n=15, oracle=OracleConfig(1.0, 1.0), trials=100, max_trials=20_000)
    assert montecarlo.run(cfg).trials == 100


def test_config_errors():
    with pytest.raises(McError):
        McConfig(n=5, code="ldpc")
    with pytest.raises(McError):
        McConfig(n=5, trials=0)
    with pytest.raises(McError):
        McConfig(n=5, b=6)
    with pytest.raises(McError):
        McConfig(n=5, oracle=OracleConfig(0.0, 1.0))
