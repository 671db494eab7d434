"""Transition records and a uniform ring-buffer replay store."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InputError, StateError


@dataclass(frozen=True)
class Transition:
    s: np.ndarray
    a: np.ndarray
    r: float
    s_next: np.ndarray
    done: bool


@dataclass
class TransitionBatch:
    """Column-wise batch: s (n, ds), a (n, da), r (n,), s_next (n, ds), done (n,) bool."""

    s: np.ndarray
    a: np.ndarray
    r: np.ndarray
    s_next: np.ndarray
    done: np.ndarray

    def __len__(self):
        return self.r.shape[0]

    def __getitem__(self, idx) -> "TransitionBatch":
        return TransitionBatch(self.s[idx], self.a[idx], self.r[idx], self.s_next[idx], self.done[idx])

    def row(self, i: int) -> Transition:
        return Transition(self.s[i].copy(), self.a[i].copy(), float(self.r[i]),
                          self.s_next[i].copy(), bool(self.done[i]))

    @classmethod
    def from_transitions(cls, items) -> "TransitionBatch":
        items = list(items)
        if not items:
            raise InputError("cannot build a batch from zero transitions")
        return cls(np.stack([np.asarray(t.s, float) for t in items]),
                   np.stack([np.atleast_1d(np.asarray(t.a, float)) for t in items]),
                   np.array([t.r for t in items], dtype=float),
                   np.stack([np.asarray(t.s_next, float) for t in items]),
                   np.array([t.done for t in items], dtype=bool))

    @staticmethod
    def concat(*batches) -> "TransitionBatch":
        return TransitionBatch(*(np.concatenate([getattr(b, f) for b in batches])
                                 for f in ("s", "a", "r", "s_next", "done")))

    def with_rewards(self, r: np.ndarray) -> "TransitionBatch":
        return TransitionBatch(self.s, self.a, r, self.s_next, self.done)

    def sas(self):
        return self.s, self.a, self.s_next


class ReplayBuffer:
    """Fixed-capacity ring buffer with uniform sampling.

    Entries are addressed by their global insertion id (0, 1, 2, ...); the id
    of a live entry lies in ``[pushed - len, pushed)``.
    """

    def __init__(self, capacity: int, state_dim: int, action_dim: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = int(capacity)
        self.s = np.zeros((capacity, state_dim))
        self.a = np.zeros((capacity, action_dim))
        self.r = np.zeros(capacity)
        self.s_next = np.zeros((capacity, state_dim))
        self.done = np.zeros(capacity, dtype=bool)
        self.pushed = 0

    def __len__(self):
        return min(self.pushed, self.capacity)

    def _store(self, t: Transition) -> int:
        slot = self.pushed % self.capacity
        self.s[slot] = t.s
        self.a[slot] = t.a
        self.r[slot] = t.r
        self.s_next[slot] = t.s_next
        self.done[slot] = t.done
        self.pushed += 1
        return slot

    def push(self, t: Transition) -> None:
        self._store(t)

    def is_live(self, ids: np.ndarray) -> np.ndarray:
        ids = np.asarray(ids)
        return (ids < self.pushed) & (ids >= self.pushed - len(self))

    def gather(self, ids) -> TransitionBatch:
        slots = np.asarray(ids) % self.capacity
        return TransitionBatch(self.s[slots], self.a[slots], self.r[slots],
                               self.s_next[slots], self.done[slots])

    def sample_uniform(self, n: int, rng: np.random.Generator):
        """(batch, ids) with ids drawn uniformly with replacement."""
        if len(self) == 0:
            raise StateError("cannot sample from an empty buffer")
        ids = self.pushed - len(self) + rng.integers(len(self), size=n)
        return self.gather(ids), ids

    def live_ids(self) -> np.ndarray:
        return np.arange(self.pushed - len(self), self.pushed)
