import math

import numpy as np
import pytest

from election_coding import bounds
from election_coding.oracle import OracleConfig, OracleError, partition_noise, sample_partition_gradient, sign_error_rate


def test_noiseless_is_exact():
    cfg = OracleConfig(g=0.7, sigma=0.0, batch=4)
    assert np.all(sample_partition_gradient(cfg, np.random.default_rng(0), 100) == 0.7)
    assert sign_error_rate(cfg, 1000) == (0.0, 0.0)


@pytest.mark.parametrize("noise", ["gaussian", "laplace"])
def test_zero_mean(noise):
    cfg = OracleConfig(g=0.0, sigma=1.0, batch=8, noise=noise)
    x = sample_partition_gradient(cfg, np.random.default_rng(1), 10**5)
    assert abs(x.mean()) < 4 * 1.0 / (math.sqrt(8) * math.sqrt(10**5))


@pytest.mark.parametrize("noise", ["gaussian", "laplace"])
def test_variance_is_sigma2_over_batch(noise):
    cfg = OracleConfig(g=1.0, sigma=1.0, batch=128, noise=noise)
    n = 10**6 if noise == "gaussian" else 10**5
    x = sample_partition_gradient(cfg, np.random.default_rng(2), n)
    assert x.var() == pytest.approx(1 / 128, rel=0.05)


def test_scalar_draw():
    v = sample_partition_gradient(OracleConfig(1.0, 1.0), np.random.default_rng(0))
    assert isinstance(v, float)


def test_sign_error_under_two_arm_bound():
    for S, g in [(1.0, 1.0), (3.0, 3.0)]:
        cfg = OracleConfig(g=g, sigma=1.0, batch=1, noise="laplace")
        rate, se = sign_error_rate(cfg, 10**5, seed=3)
        assert rate <= bounds.sign_error_bound(S) + 3 * se


def test_gaussian_matches_phi():
    cfg = OracleConfig(g=1.0, sigma=1.0, batch=1)
    rate, _ = sign_error_rate(cfg, 10**6, seed=1)
    p = bounds.gaussian_sign_error(1.0)
    assert abs(rate - p) < 3 * math.sqrt(p * (1 - p) / 10**6)


def test_error_decreases_with_batch():
    rates = [sign_error_rate(OracleConfig(0.2, 1.0, batch=B), 10**5, seed=4)[0] for B in [1, 2, 4, 8, 16, 32]]
    assert all(a > b for a, b in zip(rates, rates[1:]))
    S = [OracleConfig(0.2, 1.0, batch=B).snr for B in [1, 2]]
    assert S[1] == pytest.approx(math.sqrt(2) * S[0])


def test_thread_invariance():
    cfg = OracleConfig(g=0.5, sigma=1.0, batch=3)
    assert sign_error_rate(cfg, 300_001, seed=5, threads=1) == sign_error_rate(cfg, 300_001, seed=5, threads=8)


def test_negative_gradient():
    rate, _ = sign_error_rate(OracleConfig(g=-1.0, sigma=1.0), 10**5, seed=0)
    assert rate == pytest.approx(bounds.gaussian_sign_error(1.0), abs=0.005)


def test_errors():
    with pytest.raises(OracleError):
        sign_error_rate(OracleConfig(g=0.0, sigma=1.0), 10)
    with pytest.raises(OracleError):
        OracleConfig(g=1.0, sigma=-1.0)
    with pytest.raises(OracleError):
        OracleConfig(g=1.0, sigma=1.0, batch=0)
    with pytest.raises(OracleError):
        OracleConfig(g=1.0, sigma=1.0, noise="cauchy")
    with pytest.raises(OracleError):
        partition_noise(np.random.default_rng(0), 1.0, 1, "cauchy", 3)
