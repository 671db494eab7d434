import numpy as np
import pytest
from scipy.stats import beta

from dads.errors import ConfigurationError, InputError
from dads.mixup import MixupConfig, mix, mix_batch, mix_rows, sample_lambda
from dads.transitions import Transition, TransitionBatch


def pair(done_src=False, done_tar=False):
    src = Transition(np.array([1.0, 2.0]), np.array([0.5]), 1.0, np.array([1.5, 2.5]), done_src)
    tar = Transition(np.array([-1.0, 0.0]), np.array([-0.5]), 3.0, np.array([-0.5, 0.5]), done_tar)
    return src, tar


def random_batch(rng, n, done_prob=0.0):
    return TransitionBatch(rng.standard_normal((n, 3)), rng.standard_normal((n, 1)),
                           rng.standard_normal(n), rng.standard_normal((n, 3)),
                           rng.random(n) < done_prob)


def assert_same(t1, t2):
    for f in ("s", "a", "s_next"):
        np.testing.assert_array_equal(getattr(t1, f), getattr(t2, f))
    assert t1.r == t2.r and t1.done == t2.done


def test_lambda_endpoints_return_one_side():
    src, tar = pair()
    assert_same(mix(src, tar, 1.0), src)
    assert_same(mix(src, tar, 0.0), tar)


def test_half_mix_example():
    src, tar = pair()
    out = mix(src, tar, 0.25)
    assert out.r == pytest.approx(2.5)
    np.testing.assert_allclose(out.s, [-0.5, 0.5])
    np.testing.assert_allclose(out.a, [-0.25])
    np.testing.assert_allclose(out.s_next, [0.0, 1.0])
    assert out.done is False


def test_terminal_on_either_side_returns_target():
    for flags in ((True, False), (False, True), (True, True)):
        src, tar = pair(*flags)
        assert_same(mix(src, tar, 0.7), tar)


def test_lambda_outside_unit_interval_is_rejected():
    src, tar = pair()
    with pytest.raises(InputError):
        mix(src, tar, 1.2)


def test_shape_mismatch_is_rejected():
    src, _ = pair()
    other = Transition(np.zeros(3), np.zeros(1), 0.0, np.zeros(3), False)
    with pytest.raises(InputError):
        mix(src, other, 0.5)
    rng = np.random.default_rng(0)
    with pytest.raises(InputError):
        mix_batch(random_batch(rng, 4), random_batch(rng, 5), MixupConfig(), rng)


def test_alpha_must_be_positive():
    with pytest.raises(ConfigurationError):
        MixupConfig(alpha=0.0)


def test_lambda_distribution_matches_beta():
    rng = np.random.default_rng(1)
    lam = sample_lambda(MixupConfig(alpha=0.2), rng, 200_000)
    assert np.all((lam >= 0) & (lam <= 1))
    assert lam.mean() == pytest.approx(0.5, abs=0.005)
    # Beta(0.2, 0.2) is U-shaped: most mass sits in the outer fifths
    tails = np.mean((lam < 0.1) | (lam > 0.9))
    expected = 2 * beta.cdf(0.1, 0.2, 0.2)
    assert tails > 0.55
    assert tails == pytest.approx(expected, abs=0.005)


def test_mix_is_symmetric_under_swap():
    rng = np.random.default_rng(2)
    a, b = random_batch(rng, 50), random_batch(rng, 50)
    lam = rng.random(50)
    x, y = mix_rows(a, b, lam), mix_rows(b, a, 1 - lam)
    for f in ("s", "a", "r", "s_next"):
        np.testing.assert_allclose(getattr(x, f), getattr(y, f), atol=1e-14)


def test_batch_mix_matches_per_row_oracle():
    rng = np.random.default_rng(3)
    a, b = random_batch(rng, 40, 0.2), random_batch(rng, 40, 0.2)
    lam = rng.random(40)
    out = mix_rows(a, b, lam)
    for i in range(40):
        assert_same(out.row(i), mix(a.row(i), b.row(i), lam[i]))


def test_mix_batch_is_seed_deterministic():
    rng = np.random.default_rng(4)
    a, b = random_batch(rng, 16), random_batch(rng, 16)
    x = mix_batch(a, b, MixupConfig(), np.random.default_rng(9))
    y = mix_batch(a, b, MixupConfig(), np.random.default_rng(9))
    np.testing.assert_array_equal(x.s, y.s)


def test_mixed_points_lie_on_the_segment():
    rng = np.random.default_rng(5)
    a, b = random_batch(rng, 100), random_batch(rng, 100)
    out = mix_batch(a, b, MixupConfig(), rng)
    lo, hi = np.minimum(a.s, b.s), np.maximum(a.s, b.s)
    assert np.all(out.s >= lo - 1e-12) and np.all(out.s <= hi + 1e-12)
