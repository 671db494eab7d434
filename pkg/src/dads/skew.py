"""Skewed source sampling: priority weights, sum-tree, prioritized buffer.

A source transition with estimated log-ratio ``l = log P_tar/P_src`` gets
weight ``w = exp(l / (1 + mu))``, proportional to ``P*/P_src`` where ``P*``
is the geometric mixture ``P_src^(mu/(1+mu)) P_tar^(1/(1+mu))``.  Sampling
transitions proportionally to ``w`` therefore draws from ``P*``.
"""

from __future__ import annotations

import numpy as np

from .errors import ConfigurationError, InputError, StateError
from .transitions import ReplayBuffer, Transition, TransitionBatch

PRIORITY_FLOOR = 1e-6


def priority_weight(log_ratio, mu: float = 1.0, floor: float = PRIORITY_FLOOR):
    """exp(log_ratio / (1 + mu)), floored; scalar or array."""
    if mu < 0:
        raise ConfigurationError(f"mu must be non-negative, got {mu}")
    w = np.exp(np.asarray(log_ratio, dtype=float) / (1.0 + mu))
    w = np.maximum(w, floor)
    return float(w) if w.ndim == 0 else w


def skewed_distribution(p_src, p_tar, mu: float) -> np.ndarray:
    """Normalized geometric mixture P* of two discrete distributions.

    Outcomes outside the source support get zero mass for every mu
    (including mu = 0, where P* is p_tar restricted to the source support).
    """
    p_src = np.asarray(p_src, dtype=float)
    p_tar = np.asarray(p_tar, dtype=float)
    if p_src.shape != p_tar.shape:
        raise InputError("distributions must share a support")
    if mu < 0:
        raise ConfigurationError(f"mu must be non-negative, got {mu}")
    both = (p_src > 0) & (p_tar > 0)
    if not both.any():
        raise InputError("source and target supports are disjoint")
    out = np.zeros_like(p_src)
    ls, lt = np.log(p_src[both]), np.log(p_tar[both])
    logits = ls + (lt - ls) / (1.0 + mu)
    out[both] = np.exp(logits - logits.max())
    return out / out.sum()


class SumTree:
    """Binary tree of priority sums over ``capacity`` leaves.

    Node 1 is the root; node i has children 2i and 2i+1; leaf j sits at
    ``base + j`` with ``base`` the smallest power of two >= capacity.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ConfigurationError("capacity must be positive")
        self.capacity = int(capacity)
        self.base = 1 << max(0, (self.capacity - 1).bit_length())
        self.depth = self.base.bit_length() - 1
        self.nodes = np.zeros(2 * self.base)

    @property
    def total(self) -> float:
        return float(self.nodes[1])

    def leaves(self) -> np.ndarray:
        return self.nodes[self.base:self.base + self.capacity]

    def set(self, leaf: int, value: float) -> None:
        nodes = self.nodes
        i = self.base + leaf
        nodes[i] = value
        i >>= 1
        while i:
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1]
            i >>= 1

    def set_many(self, leaves, values) -> None:
        """Vectorized update; duplicate leaves keep the last value.

        Repeated parents are harmless: each write stores the same child sum.
        """
        idx = self.base + np.asarray(leaves, dtype=np.int64)
        self.nodes[idx] = values
        nodes = self.nodes
        for _ in range(self.depth):
            idx >>= 1
            nodes[idx] = nodes[2 * idx] + nodes[2 * idx + 1]

    def find(self, values: np.ndarray) -> np.ndarray:
        """Leaf whose prefix-sum interval contains each value in [0, total)."""
        nodes = self.nodes
        v = np.array(values, dtype=float)
        idx = np.ones(v.shape, dtype=np.int64)
        for _ in range(self.depth):
            left = 2 * idx
            lsum = nodes[left]
            right = (v >= lsum) & (nodes[left + 1] > 0)
            right |= lsum <= 0
            v = np.where(right, v - lsum, v)
            idx = left + right
        return idx - self.base

    def rebuild(self) -> None:
        nodes = self.nodes
        for i in range(self.base - 1, 0, -1):
            nodes[i] = nodes[2 * i] + nodes[2 * i + 1]

    def max_residual(self) -> float:
        """Largest relative mismatch between an internal node and its children."""
        inner = np.arange(1, self.base)
        kids = self.nodes[2 * inner] + self.nodes[2 * inner + 1]
        scale = np.maximum(np.abs(kids), 1e-300)
        return float(np.max(np.abs(self.nodes[inner] - kids) / scale)) if inner.size else 0.0


class PrioritizedBuffer(ReplayBuffer):
    """Ring buffer whose sampling probability is proportional to priority."""

    def __init__(self, capacity: int, state_dim: int, action_dim: int, mu: float = 1.0,
                 floor: float = PRIORITY_FLOOR):
        super().__init__(capacity, state_dim, action_dim)
        if mu < 0:
            raise ConfigurationError(f"mu must be non-negative, got {mu}")
        self.mu = float(mu)
        self.floor = float(floor)
        self.tree = SumTree(capacity)
        self.stale_updates = 0

    def push(self, t: Transition, initial_log_ratio: float = 0.0) -> None:
        slot = self._store(t)
        self.tree.set(slot, priority_weight(initial_log_ratio, self.mu, self.floor))

    def priorities(self, ids) -> np.ndarray:
        return self.tree.leaves()[np.asarray(ids) % self.capacity]

    def probabilities(self) -> np.ndarray:
        """Sampling probability of each live id, in ``live_ids()`` order."""
        p = self.priorities(self.live_ids())
        return p / p.sum()

    def sample_batch(self, n: int, rng: np.random.Generator):
        """(batch, ids): n stratified draws proportional to priority.

        Draws are stratified over n equal slices of the total mass and then
        shuffled, so every position is marginally distributed as p_i.
        """
        if len(self) == 0:
            raise StateError("cannot sample from an empty buffer")
        total = self.tree.total
        u = (np.arange(n) + rng.random(n)) * (total / n)
        u = np.minimum(u, np.nextafter(total, 0.0))
        slots = self.tree.find(rng.permutation(u))
        ids = self._slots_to_ids(slots)
        return self.gather(ids), ids

    def _slots_to_ids(self, slots):
        # id = largest id <= pushed - 1 with id % capacity == slot
        last = self.pushed - 1
        return last - ((last - slots) % self.capacity)

    def update_priorities(self, ids, log_ratios) -> None:
        ids = np.asarray(ids)
        live = self.is_live(ids)
        self.stale_updates += int((~live).sum())
        if not live.any():
            return
        w = priority_weight(np.asarray(log_ratios, dtype=float)[live], self.mu, self.floor)
        self.tree.set_many(ids[live] % self.capacity, w)

    def refresh_all(self, log_ratio_fn, chunk: int = 8192) -> None:
        """Recompute every live priority from ``log_ratio_fn(s, a, s_next)``."""
        ids = self.live_ids()
        for start in range(0, ids.size, chunk):
            part = ids[start:start + chunk]
            b = self.gather(part)
            self.update_priorities(part, log_ratio_fn(b.s, b.a, b.s_next))
