import numpy as np
import pytest

from dads import tabular as tb
from dads.errors import ConfigurationError, PreconditionError


def single_state(r=1.0, gamma=0.9, n_actions=1):
    return tb.TabularMDP(np.ones((1, n_actions, 1)), np.full((1, n_actions), r), gamma, np.ones(1))


def test_mdp_validation():
    with pytest.raises(ConfigurationError):
        tb.TabularMDP(np.full((2, 1, 2), 0.6), np.zeros((2, 1)), 0.9, np.array([0.5, 0.5]))
    with pytest.raises(ConfigurationError):
        tb.TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 1)), 1.0, np.ones(1))
    with pytest.raises(ConfigurationError):
        tb.TabularMDP(np.ones((1, 1, 1)), np.zeros((1, 1)), 0.5, np.array([0.7]))
    mdp = single_state()
    with pytest.raises(ConfigurationError):
        tb.policy_evaluation(mdp, np.array([[0.5]]))


def test_policy_evaluation_closed_forms():
    assert tb.policy_evaluation(single_state(), np.ones((1, 1)))[0] == pytest.approx(10.0, abs=1e-12)
    rng = np.random.default_rng(0)
    mdp = tb.random_mdp(4, 3, 0.95, rng)
    zero = tb.TabularMDP(mdp.dynamics, np.zeros((4, 3)), 0.95, mdp.rho0)
    np.testing.assert_array_equal(tb.policy_evaluation(zero, tb.random_policy(4, 3, rng)), 0.0)


def test_bellman_residual():
    rng = np.random.default_rng(1)
    for _ in range(20):
        mdp = tb.random_mdp(7, 3, 0.99, rng)
        pi = tb.random_policy(7, 3, rng)
        v = tb.policy_evaluation(mdp, pi)
        r_pi = (pi * mdp.reward).sum(1)
        P_pi = np.einsum("sa,sat->st", pi, mdp.dynamics)
        assert np.max(np.abs(v - (r_pi + 0.99 * P_pi @ v))) < 1e-10


def _rollouts(mdp, pi, rng, n, horizon):
    """Vectorized trajectories; returns states (n, T) and actions (n, T)."""
    S, A = mdp.n_states, mdp.n_actions
    s = rng.choice(S, size=n, p=mdp.rho0)
    cum_pi = np.cumsum(pi, axis=1)
    cum_P = np.cumsum(mdp.dynamics, axis=2)
    states = np.empty((n, horizon), dtype=int)
    actions = np.empty((n, horizon), dtype=int)
    for t in range(horizon):
        a = np.minimum((rng.random(n)[:, None] > cum_pi[s]).sum(1), A - 1)
        states[:, t], actions[:, t] = s, a
        s = np.minimum((rng.random(n)[:, None] > cum_P[s, a]).sum(1), S - 1)
    return states, actions


def test_policy_evaluation_matches_monte_carlo():
    rng = np.random.default_rng(2)
    mdp = tb.random_mdp(5, 2, 0.9, rng)
    pi = tb.random_policy(5, 2, rng)
    horizon = 160  # 0.9**160 < 5e-8
    states, actions = _rollouts(mdp, pi, rng, 8000, horizon)  # ~1.3e6 steps
    disc = 0.9 ** np.arange(horizon)
    returns = (mdp.reward[states, actions] * disc).sum(1)
    se = returns.std(ddof=1) / np.sqrt(returns.size)
    assert abs(returns.mean() - tb.expected_return(mdp, pi)) < 3 * se


def test_occupancy_simple_cases():
    mdp = single_state(n_actions=3)
    pi = np.array([[0.2, 0.3, 0.5]])
    np.testing.assert_allclose(tb.occupancy_measure(mdp, pi), pi, atol=1e-15)
    rng = np.random.default_rng(3)
    m = tb.random_mdp(4, 2, 1e-9, rng)
    pi = tb.random_policy(4, 2, rng)
    np.testing.assert_allclose(tb.occupancy_measure(m, pi), m.rho0[:, None] * pi, atol=1e-8)


def test_occupancy_balance_and_normalization():
    rng = np.random.default_rng(4)
    for gamma in (0.5, 0.9, 0.99):
        mdp = tb.random_mdp(6, 3, gamma, rng)
        pi = tb.random_policy(6, 3, rng)
        rho = tb.occupancy_measure(mdp, pi)
        assert np.all(rho >= 0)
        assert abs(rho.sum() - 1.0) < 1e-10
        d = rho.sum(1)
        balance = (1 - gamma) * mdp.rho0 + gamma * np.einsum("sa,sat->t", rho, mdp.dynamics)
        assert np.max(np.abs(d - balance)) < 1e-10


def test_occupancy_matches_discounted_visit_frequency():
    rng = np.random.default_rng(5)
    gamma = 0.8
    mdp = tb.random_mdp(4, 2, gamma, rng)
    pi = tb.random_policy(4, 2, rng)
    n = 200_000
    # stop at T ~ Geometric(1 - gamma) (support 0, 1, ...): P(s_T, a_T) = rho
    T = rng.geometric(1 - gamma, size=n) - 1
    horizon = int(T.max()) + 1
    states, actions = _rollouts(mdp, pi, rng, n, horizon)
    s_T, a_T = states[np.arange(n), T], actions[np.arange(n), T]
    freq = np.zeros((4, 2))
    np.add.at(freq, (s_T, a_T), 1.0 / n)
    rho = tb.occupancy_measure(mdp, pi)
    se = np.sqrt(rho * (1 - rho) / n)
    assert np.all(np.abs(freq - rho) < 3 * se + 1e-12)


def test_performance_identities():
    mdp = tb.TabularMDP(np.ones((1, 1, 1)), np.ones((1, 1)), 0.9, np.ones(1))
    assert tb.performance(mdp, np.ones((1, 1))) == pytest.approx(1.0, abs=1e-12)
    rng = np.random.default_rng(6)
    m = tb.random_mdp(5, 3, 0.95, rng)
    const = tb.TabularMDP(m.dynamics, np.full((5, 3), -0.7), 0.95, m.rho0)
    pi = tb.random_policy(5, 3, rng)
    assert tb.performance(const, pi) == pytest.approx(-0.7, abs=1e-12)
    assert abs(tb.performance(m, pi) - 0.05 * tb.expected_return(m, pi)) < 1e-10


def test_telescoping_identity():
    rng = np.random.default_rng(7)
    m1, m2 = tb.random_full_support_pair(5, 2, 0.9, rng)
    pi = tb.random_policy(5, 2, rng)
    assert tb.telescoping_gap(m1, m1, pi) == (0.0, 0.0)
    for _ in range(100):
        n_s, n_a = rng.integers(3, 11), rng.integers(2, 5)
        gamma = rng.choice([0.9, 0.99])
        m1, m2 = tb.random_full_support_pair(n_s, n_a, gamma, rng)
        pi = tb.random_policy(n_s, n_a, rng)
        lhs, rhs = tb.telescoping_gap(m1, m2, pi)
        assert abs(lhs - rhs) < 1e-8


def test_telescoping_single_row_change():
    rng = np.random.default_rng(8)
    m1 = tb.random_mdp(5, 2, 0.9, rng)
    P = m1.dynamics.copy()
    P[2, 1] = rng.dirichlet(np.ones(5))
    m2 = m1.with_dynamics(P)
    pi = tb.random_policy(5, 2, rng)
    lhs, rhs = tb.telescoping_gap(m1, m2, pi)
    assert abs(lhs) > 1e-6
    assert abs(lhs - rhs) < 1e-10


def test_pair_shape_checks():
    rng = np.random.default_rng(9)
    a = tb.random_mdp(3, 2, 0.9, rng)
    b = tb.random_mdp(4, 2, 0.9, rng)
    with pytest.raises(ConfigurationError):
        tb.telescoping_gap(a, b, tb.random_policy(3, 2, rng))
    c = tb.random_mdp(3, 2, 0.9, rng)  # different reward
    with pytest.raises(ConfigurationError):
        tb.telescoping_gap(a, c, tb.random_policy(3, 2, rng))


def test_full_support_bound():
    rng = np.random.default_rng(10)
    src, tar = tb.random_full_support_pair(4, 2, 0.9, rng)
    pi = tb.random_policy(4, 2, rng)
    assert tb.bound_full_support(tar, tar, pi) == (0.0, 0.0)
    for _ in range(100):
        n_s, n_a = rng.integers(3, 11), rng.integers(2, 5)
        src, tar = tb.random_full_support_pair(n_s, n_a, rng.choice([0.9, 0.99]), rng)
        pi = tb.random_policy(n_s, n_a, rng)
        gap, bound = tb.bound_full_support(src, tar, pi)
        assert gap <= bound


def test_full_support_precondition():
    rng = np.random.default_rng(11)
    src, tar = tb.random_deficient_pair(4, 2, 0.9, rng)
    with pytest.raises(PreconditionError):
        tb.bound_full_support(src, tar, tb.random_policy(4, 2, rng))


def test_zero_kl_means_zero_gap():
    # same dynamics built from two different generators
    P = np.random.default_rng(12).dirichlet(np.ones(4), size=(4, 2))
    m1 = tb.random_mdp(4, 2, 0.9, np.random.default_rng(13)).with_dynamics(P.copy())
    m2 = m1.with_dynamics(P.copy())
    gap, bound = tb.bound_full_support(m1, m2, tb.random_policy(4, 2, np.random.default_rng(14)))
    assert gap == 0.0 and bound == 0.0


def test_support_partition_invariants():
    rng = np.random.default_rng(15)
    src, tar = tb.random_deficient_pair(6, 3, 0.9, rng)
    part = tb.support_partition(src, tar)
    assert part.deficient
    assert not np.any(part.unsupported & part.supported)
    assert np.all((part.unsupported | part.supported)[tar.dynamics > 0])


def test_deficient_bound_examples():
    rng = np.random.default_rng(16)
    src, tar = tb.random_full_support_pair(5, 2, 0.9, rng)
    pi = tb.random_policy(5, 2, rng)
    gap, a, b, bound = tb.bound_deficient_support(src, tar, pi)
    assert b == 0.0 and bound == a and gap <= bound
    assert tb.bound_deficient_support(tar, tar, pi) == (0.0, 0.0, 0.0, 0.0)


def test_deficient_bound_holds():
    rng = np.random.default_rng(17)
    for _ in range(100):
        n_s, n_a = rng.integers(3, 11), rng.integers(2, 5)
        src, tar = tb.random_deficient_pair(n_s, n_a, rng.choice([0.9, 0.99]), rng)
        pi = tb.random_policy(n_s, n_a, rng)
        gap, a, b, bound = tb.bound_deficient_support(src, tar, pi)
        assert gap <= bound
        assert b > 0  # random instances reach every unsupported state


def test_random_deficient_pair_keeps_rows_valid():
    rng = np.random.default_rng(18)
    for _ in range(50):
        src, tar = tb.random_deficient_pair(3, 2, 0.9, rng, drop_prob=0.9)
        assert np.all(src.dynamics.max(-1) > 0)
        assert not tb.has_full_support(src, tar)
