"""Classifier-based estimates of the dynamics log-ratio between two domains.

A :class:`ClassifierPair` holds two binary classifiers, one over
``(s, a, s')`` and one over ``(s, a)``.  Label 0 is domain A (source or
modified source), label 1 is domain B (target).  The log-ratio
``log P_B(s'|s,a) - log P_A(s'|s,a)`` is the log-odds of B under the
transition classifier minus the log-odds of B under the state-action one.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .nn import Adam, Mlp


class RunningNorm:
    """Per-feature running mean/variance (parallel Welford merge)."""

    def __init__(self, dim: int):
        self.count = 0
        self.mean = np.zeros(dim)
        self.m2 = np.zeros(dim)

    def update(self, x: np.ndarray) -> None:
        n = x.shape[0]
        if n == 0:
            return
        b_mean = x.mean(axis=0)
        b_m2 = ((x - b_mean) ** 2).sum(axis=0)
        total = self.count + n
        delta = b_mean - self.mean
        self.mean = self.mean + delta * (n / total)
        self.m2 = self.m2 + b_m2 + delta ** 2 * (self.count * n / total)
        self.count = total

    @property
    def std(self) -> np.ndarray:
        var = self.m2 / self.count if self.count else np.ones_like(self.m2)
        return np.sqrt(var + 1e-8)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


def _log_softmax(z):
    zmax = z.max(axis=1, keepdims=True)
    shifted = z - zmax
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def _cross_entropy(net: Mlp, x: np.ndarray, labels: np.ndarray):
    """Mean CE and its parameter gradients."""
    z = net.forward(x)
    logp = _log_softmax(z)
    n = x.shape[0]
    loss = -float(logp[np.arange(n), labels].mean())
    grad = np.exp(logp)
    grad[np.arange(n), labels] -= 1.0
    return loss, net.backward(grad / n)


class ClassifierPair:
    def __init__(self, state_dim: int, action_dim: int, hidden=(32, 32), lr: float = 3e-4,
                 input_noise_std: float = 1.0, logit_clip: float = 10.0, rng=None,
                 dtype=np.float64):
        rng = np.random.default_rng() if rng is None else rng
        self.state_dim = state_dim
        self.action_dim = action_dim
        self.sa_dim = state_dim + action_dim
        self.q_sas = Mlp([2 * state_dim + action_dim, *hidden, 2], rng=rng, dtype=dtype)
        self.q_sa = Mlp([self.sa_dim, *hidden, 2], rng=rng, dtype=dtype)
        self.opt_sas = Adam(self.q_sas.params, lr=lr)
        self.opt_sa = Adam(self.q_sa.params, lr=lr)
        self.norm = RunningNorm(2 * state_dim + action_dim)
        self.input_noise_std = float(input_noise_std)
        self.logit_clip = float(logit_clip)
        self.steps = 0

    def _inputs(self, s, a, s_next) -> np.ndarray:
        x = np.concatenate([np.atleast_2d(s), np.atleast_2d(a), np.atleast_2d(s_next)], axis=1)
        if x.shape[1] != self.norm.mean.shape[0]:
            raise InputError(f"transition width {x.shape[1]} does not match classifier input")
        return x

    def train_step(self, batch_a, batch_b, rng: np.random.Generator) -> float:
        """One Adam step on both classifiers; returns their mean cross-entropy.

        ``batch_a`` / ``batch_b`` are ``(s, a, s_next)`` array triples.
        Gaussian noise of std ``input_noise_std`` is added to the
        standardized inputs.
        """
        xa = self._inputs(*batch_a)
        xb = self._inputs(*batch_b)
        if xa.shape[0] == 0 or xb.shape[0] == 0:
            raise InputError("both domain batches must be non-empty")
        x = np.concatenate([xa, xb])
        self.norm.update(x)
        x = self.norm(x)
        if self.input_noise_std > 0:
            x = x + self.input_noise_std * rng.standard_normal(x.shape)
        labels = np.concatenate([np.zeros(len(xa), dtype=int), np.ones(len(xb), dtype=int)])
        loss_sas, g_sas = _cross_entropy(self.q_sas, x, labels)
        loss_sa, g_sa = _cross_entropy(self.q_sa, x[:, :self.sa_dim], labels)
        self.opt_sas.step(g_sas)
        self.opt_sa.step(g_sa)
        self.steps += 1
        return 0.5 * (loss_sas + loss_sa)

    def log_odds(self, s, a, s_next) -> tuple[np.ndarray, np.ndarray]:
        """Clamped log-odds of domain B from each classifier (no input noise)."""
        x = self._inputs(s, a, s_next)
        if not np.all(np.isfinite(x)):
            raise InputError("non-finite transition")
        x = self.norm(x)
        z_sas = self.q_sas.predict(x)
        z_sa = self.q_sa.predict(x[:, :self.sa_dim])
        c = self.logit_clip
        # downstream rewards and weights are float64 whatever the net precision
        d_sas = np.clip((z_sas[:, 1] - z_sas[:, 0]).astype(np.float64), -c, c)
        d_sa = np.clip((z_sa[:, 1] - z_sa[:, 0]).astype(np.float64), -c, c)
        return d_sas, d_sa

    def log_ratio(self, s, a, s_next) -> np.ndarray:
        d_sas, d_sa = self.log_odds(s, a, s_next)
        return d_sas - d_sa


def log_dynamics_ratio(pair: ClassifierPair, s, a, s_next) -> np.ndarray:
    """Estimated log P_tar(s'|s,a) - log P_src(s'|s,a), one value per row."""
    return pair.log_ratio(s, a, s_next)


def delta_r(pair_modified: ClassifierPair, s, a, s_next) -> np.ndarray:
    """Reward increment log P_tar - log P_msrc from the modified-source pair."""
    return pair_modified.log_ratio(s, a, s_next)
