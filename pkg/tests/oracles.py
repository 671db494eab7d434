"""Slow, obviously-correct reference implementations used by the tests."""

import numpy as np


def tv(p, q) -> float:
    """Total variation distance between two discrete distributions."""
    return 0.5 * float(np.abs(np.asarray(p, dtype=float) - np.asarray(q, dtype=float)).sum())


class LinearScan:
    """Priority list kept as plain arrays; sampling walks the prefix sums."""

    def __init__(self, weights, ids=None):
        self.weights = np.asarray(weights, dtype=float).copy()
        self.ids = np.arange(self.weights.size) if ids is None else np.asarray(ids)

    @classmethod
    def empty(cls):
        return cls(np.zeros(0), np.zeros(0, dtype=int))

    def push(self, ident, weight, capacity):
        self.ids = np.append(self.ids, ident)[-capacity:]
        self.weights = np.append(self.weights, weight)[-capacity:]

    def set(self, ident, weight):
        self.weights[list(self.ids).index(ident)] = weight

    def total(self) -> float:
        return float(sum(self.weights))

    def probabilities(self) -> np.ndarray:
        return self.weights / self.total()

    def sample(self, n, rng) -> np.ndarray:
        cum = np.cumsum(self.weights)
        u = rng.random(n) * cum[-1]
        return self.ids[np.searchsorted(cum, u, side="right")]


def simplex_grid(resolution: float) -> np.ndarray:
    """Every point of the 3-point simplex on a grid with strictly positive mass."""
    k = int(round(1 / resolution))
    i, j = np.meshgrid(np.arange(1, k), np.arange(1, k), indexing="ij")
    keep = i + j < k
    i, j = i[keep], j[keep]
    return np.stack([i, j, k - i - j], axis=1) / k


def _kl_rows(P, q):
    return np.sum(P * (np.log(P) - np.log(q)), axis=1)


def lagrangian_grid_optimum(p_src, p_tar, mu: float, resolution: float) -> np.ndarray:
    """Grid point minimizing KL(P || p_tar) + mu KL(P || p_src)."""
    P = simplex_grid(resolution)
    return P[np.argmin(_kl_rows(P, p_tar) + mu * _kl_rows(P, p_src))]


def constrained_grid_minimum(p_src, p_tar, budget: float, resolution: float) -> float:
    """min KL(P || p_tar) over grid points with KL(P || p_src) <= budget."""
    P = simplex_grid(resolution)
    feasible = P[_kl_rows(P, p_src) <= budget]
    return float(np.min(_kl_rows(feasible, p_tar)))


def kl(p, q) -> float:
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    m = p > 0
    return float(np.sum(p[m] * (np.log(p[m]) - np.log(q[m]))))
