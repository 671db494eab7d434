"""Exact finite-MDP evaluation and numerical checks of the performance bounds.

Conventions
-----------
``occupancy_measure`` is the *normalized* discounted state-action occupancy
(sums to one) and ``performance`` is its reward expectation, so
``performance == (1 - gamma) * rho0 @ V``.  ``expected_return`` is the
unnormalized discounted return ``rho0 @ V``.  The telescoping identity and
both gap bounds are stated for the unnormalized return, which is the quantity
the bound derivations actually control.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, PreconditionError

ZERO = 1e-12


@dataclass(frozen=True)
class TabularMDP:
    dynamics: np.ndarray  # P[s, a, s']
    reward: np.ndarray  # r[s, a]
    gamma: float
    rho0: np.ndarray

    def __post_init__(self):
        P, r, rho0 = self.dynamics, self.reward, self.rho0
        if P.ndim != 3 or P.shape[0] != P.shape[2]:
            raise ConfigurationError(f"dynamics must have shape (S, A, S), got {P.shape}")
        if r.shape != P.shape[:2]:
            raise ConfigurationError(f"reward shape {r.shape} does not match dynamics {P.shape}")
        if rho0.shape != (P.shape[0],):
            raise ConfigurationError("rho0 must be a vector over states")
        if not 0.0 <= self.gamma < 1.0:
            raise ConfigurationError(f"gamma must lie in [0, 1), got {self.gamma}")
        if np.any(P < 0) or np.max(np.abs(P.sum(-1) - 1.0)) > 1e-12:
            raise ConfigurationError("each dynamics row must be a probability vector")
        if np.any(rho0 < 0) or abs(rho0.sum() - 1.0) > 1e-12:
            raise ConfigurationError("rho0 must be a probability vector")

    @property
    def n_states(self) -> int:
        return self.dynamics.shape[0]

    @property
    def n_actions(self) -> int:
        return self.dynamics.shape[1]

    @property
    def r_max(self) -> float:
        return float(np.max(np.abs(self.reward)))

    def with_dynamics(self, dynamics: np.ndarray) -> "TabularMDP":
        return TabularMDP(dynamics, self.reward, self.gamma, self.rho0)


def check_policy(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    policy = np.asarray(policy, dtype=float)
    if policy.shape != (mdp.n_states, mdp.n_actions):
        raise ConfigurationError(f"policy shape {policy.shape} does not match the MDP")
    if np.any(policy < 0) or np.max(np.abs(policy.sum(1) - 1.0)) > 1e-12:
        raise ConfigurationError("policy rows must be probability vectors")
    return policy


def _induced(mdp, policy):
    P_pi = np.einsum("sa,sat->st", policy, mdp.dynamics)
    r_pi = np.einsum("sa,sa->s", policy, mdp.reward)
    return P_pi, r_pi


def policy_evaluation(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    """State values V solving V = r_pi + gamma P_pi V."""
    policy = check_policy(mdp, policy)
    P_pi, r_pi = _induced(mdp, policy)
    n = mdp.n_states
    return np.linalg.solve(np.eye(n) - mdp.gamma * P_pi, r_pi)


def occupancy_measure(mdp: TabularMDP, policy: np.ndarray) -> np.ndarray:
    """Normalized discounted occupancy rho[s, a]."""
    policy = check_policy(mdp, policy)
    P_pi, _ = _induced(mdp, policy)
    n = mdp.n_states
    d = (1.0 - mdp.gamma) * np.linalg.solve(np.eye(n) - mdp.gamma * P_pi.T, mdp.rho0)
    return d[:, None] * policy


def performance(mdp: TabularMDP, policy: np.ndarray) -> float:
    return float(np.sum(occupancy_measure(mdp, policy) * mdp.reward))


def expected_return(mdp: TabularMDP, policy: np.ndarray) -> float:
    return float(mdp.rho0 @ policy_evaluation(mdp, policy))


def _check_pair(m1: TabularMDP, m2: TabularMDP):
    if m1.dynamics.shape != m2.dynamics.shape:
        raise ConfigurationError(
            f"MDPs differ in shape: {m1.dynamics.shape} vs {m2.dynamics.shape}")
    if (m1.gamma != m2.gamma or not np.array_equal(m1.reward, m2.reward)
            or not np.array_equal(m1.rho0, m2.rho0)):
        raise ConfigurationError("MDPs must share reward, gamma and rho0")


def telescoping_gap(mdp1: TabularMDP, mdp2: TabularMDP, policy) -> tuple[float, float]:
    """Both sides of the telescoping identity.

    lhs = J1 - J2 (unnormalized returns);
    rhs = gamma / (1 - gamma) * E_{rho1}[P1 V2 - P2 V2].
    """
    _check_pair(mdp1, mdp2)
    v2 = policy_evaluation(mdp2, policy)
    rho1 = occupancy_measure(mdp1, policy)
    diff = (mdp1.dynamics - mdp2.dynamics) @ v2
    g = mdp1.gamma
    lhs = expected_return(mdp1, policy) - expected_return(mdp2, policy)
    rhs = g / (1.0 - g) * float(np.sum(rho1 * diff))
    return lhs, rhs


def has_full_support(src: TabularMDP, tar: TabularMDP, zero: float = ZERO) -> bool:
    return not np.any((tar.dynamics > zero) & (src.dynamics <= zero))


def kl_rows(p: np.ndarray, q: np.ndarray, zero: float = ZERO) -> np.ndarray:
    """KL(p || q) along the last axis; assumes supp(p) within supp(q)."""
    mask = p > zero
    safe_q = np.where(mask, q, 1.0)
    safe_p = np.where(mask, p, 1.0)
    return np.sum(np.where(mask, p * np.log(safe_p / safe_q), 0.0), axis=-1)


def bound_full_support(src: TabularMDP, tar: TabularMDP, policy) -> tuple[float, float]:
    """(gap, bound) for the KL form of the full-support performance bound."""
    _check_pair(src, tar)
    if not has_full_support(src, tar):
        raise PreconditionError("source does not have full support for the target; KL is undefined")
    g = src.gamma
    gap = abs(expected_return(tar, policy) - expected_return(src, policy))
    rho_tar = occupancy_measure(tar, policy)
    kl = kl_rows(tar.dynamics, src.dynamics)
    mean_kl = max(float(np.sum(rho_tar * kl)), 0.0)
    bound = g * src.r_max / (1.0 - g) ** 2 * np.sqrt(2.0 * mean_kl)
    return gap, float(bound)


@dataclass(frozen=True)
class SupportPartition:
    """Boolean masks over (s, a, s').

    ``unsupported``: P_tar > 0 and P_src = 0.  ``supported``: P_src > 0.
    """

    unsupported: np.ndarray
    supported: np.ndarray

    @property
    def deficient(self) -> bool:
        return bool(self.unsupported.any())


def support_partition(src: TabularMDP, tar: TabularMDP, zero: float = ZERO) -> SupportPartition:
    supported = src.dynamics > zero
    unsupported = (tar.dynamics > zero) & ~supported
    return SupportPartition(unsupported, supported)


def bound_deficient_support(src: TabularMDP, tar: TabularMDP, policy):
    """(gap, term_a, term_b, bound) for the deficient-support bound.

    term_a covers next states the source can reach, term_b the target mass
    landing on states the source never reaches, weighted by |V_src|.
    """
    _check_pair(src, tar)
    g = src.gamma
    part = support_partition(src, tar)
    rho_tar = occupancy_measure(tar, policy)
    v_src = policy_evaluation(src, policy)
    gap = abs(expected_return(tar, policy) - expected_return(src, policy))

    l1 = np.sum(np.where(part.supported, np.abs(tar.dynamics - src.dynamics), 0.0), axis=-1)
    term_a = g * src.r_max / (1.0 - g) ** 2 * float(np.sum(rho_tar * l1))
    lost = np.sum(np.where(part.unsupported, tar.dynamics * np.abs(v_src), 0.0), axis=-1)
    term_b = g / (1.0 - g) * float(np.sum(rho_tar * lost))
    return gap, term_a, term_b, term_a + term_b


# -- random instances ---------------------------------------------------------

def random_policy(n_states: int, n_actions: int, rng: np.random.Generator) -> np.ndarray:
    return rng.dirichlet(np.ones(n_actions), size=n_states)


def random_mdp(n_states: int, n_actions: int, gamma: float, rng: np.random.Generator) -> TabularMDP:
    P = rng.dirichlet(np.ones(n_states), size=(n_states, n_actions))
    r = rng.uniform(-1.0, 1.0, (n_states, n_actions))
    rho0 = rng.dirichlet(np.ones(n_states))
    return TabularMDP(_renormalize(P), r, gamma, _renormalize(rho0))


def _renormalize(p):
    return p / p.sum(-1, keepdims=True)


def random_full_support_pair(n_states, n_actions, gamma, rng):
    """(src, tar) with independent Dirichlet(1) rows; full support a.s."""
    tar = random_mdp(n_states, n_actions, gamma, rng)
    P_src = _renormalize(rng.dirichlet(np.ones(n_states), size=(n_states, n_actions)))
    return tar.with_dynamics(P_src), tar


def random_deficient_pair(n_states, n_actions, gamma, rng, drop_prob: float = 0.4):
    """(src, tar) where some target-positive source entries are zeroed.

    Every (s, a) row keeps at least one positive source entry; at least one
    entry overall is dropped, so the pair always has deficient support.
    """
    src, tar = random_full_support_pair(n_states, n_actions, gamma, rng)
    P = src.dynamics.copy()
    drop = rng.random(P.shape) < drop_prob
    keep = rng.integers(n_states, size=(n_states, n_actions))
    drop[np.arange(n_states)[:, None], np.arange(n_actions)[None, :], keep] = False
    if not drop.any():
        s, a = rng.integers(n_states), rng.integers(n_actions)
        drop[s, a, (keep[s, a] + 1) % n_states] = True
    P[drop] = 0.0
    return tar.with_dynamics(_renormalize(P)), tar
