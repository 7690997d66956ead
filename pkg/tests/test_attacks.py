import numpy as np
import pytest

from election_coding.attacks import MODELS, AttackError, AttackSpec, apply_attack, select_byzantine


@pytest.mark.parametrize("model", MODELS)
def test_no_byzantines_is_passthrough(model):
    c = np.array([1, -1, 1, 1])
    assert np.array_equal(apply_attack(c, AttackSpec((), model), true_sign=1), c)


def test_reverse_single_flip():
    y = apply_attack([1, -1, 1], AttackSpec((1,), "reverse"))
    assert y.tolist() == [1, 1, 1]


def test_directional_all_ones():
    c = np.array([-1, -1, -1, 1, -1])
    y = apply_attack(c, AttackSpec((0, 1), "directional"))
    assert y.tolist() == [1, 1, -1, 1, -1]


def test_directional_custom_direction_per_coordinate():
    c = -np.ones((3, 4), dtype=np.int8)
    y = apply_attack(c, AttackSpec((2,), "directional", direction=(1, -1, 1)))
    assert y[:, 2].tolist() == [1, -1, 1]


def test_oracle_reverse_needs_true_sign():
    with pytest.raises(AttackError):
        apply_attack([1, 1, 1], AttackSpec((0,), "oracle_reverse"))


def test_oracle_reverse_batches():
    c = np.ones((2, 3), dtype=np.int8)
    y = apply_attack(c, AttackSpec((0, 2), "oracle_reverse"), true_sign=np.array([1, -1]))
    assert y.tolist() == [[-1, 1, -1], [1, 1, 1]]


def test_hamming_distance_bounded():
    rng = np.random.default_rng(0)
    for model in MODELS:
        for _ in range(100):
            n = 9
            c = rng.choice([-1, 1], size=n)
            spec = AttackSpec(select_byzantine(n, 3, rng), model)
            ts = int(rng.choice([-1, 1]))
            y = apply_attack(c, spec, true_sign=ts)
            assert np.count_nonzero(y != c) <= 3
            if model == "oracle_reverse":
                agree = sum(c[i] == ts for i in spec.byzantine)
                assert np.count_nonzero(y != c) == agree


@pytest.mark.parametrize("model", ["directional", "oracle_reverse"])
def test_idempotent(model):
    c = np.array([1, -1, 1, -1, 1])
    spec = AttackSpec((1, 4), model)
    once = apply_attack(c, spec, true_sign=1)
    assert np.array_equal(apply_attack(once, spec, true_sign=1), once)


def test_spec_validation():
    with pytest.raises(AttackError):
        AttackSpec((1, 1), "reverse")
    with pytest.raises(AttackError):
        AttackSpec((0,), "flip")
    with pytest.raises(AttackError):
        apply_attack([1, 1], AttackSpec((2,), "reverse"))
    assert AttackSpec((3, 1), "reverse").byzantine == (1, 3)


def test_select_byzantine_reproducible():
    a = select_byzantine(40, 8, np.random.default_rng(5))
    b = select_byzantine(40, 8, np.random.default_rng(5))
    assert a == b and len(set(a)) == 8 and list(a) == sorted(a)
    with pytest.raises(AttackError):
        select_byzantine(3, 4, 0)
