"""Soft actor-critic on top of :mod:`dads.nn`.

The loss functions take their Gaussian noise draws as arguments so that a
loss is a deterministic function of the parameters; this is what the
gradient checks rely on.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OptimizerError
from .nn import Adam, Mlp, polyak_update
from .transitions import TransitionBatch

LOG_STD_MIN = -5.0
LOG_STD_MAX = 2.0
_HALF_LOG_2PI = 0.5 * np.log(2 * np.pi)
_SQUASH_EPS = 1e-6


@dataclass(frozen=True)
class SacConfig:
    gamma: float = 0.99
    tau: float = 0.005
    lr: float = 3e-4
    init_temperature: float = 1.0
    hidden: tuple[int, ...] = (64, 64)
    precision: str = "float32"  # network parameter dtype ("float32" or "float64")


@dataclass
class PolicySample:
    action: np.ndarray  # scaled to the env bounds
    logp: np.ndarray
    # intermediates for backprop
    squashed: np.ndarray
    eps: np.ndarray
    std: np.ndarray
    tanh_raw: np.ndarray


class SacAgent:
    def __init__(self, obs_dim: int, act_dim: int, action_scale: float,
                 config: SacConfig = SacConfig(), rng=None):
        rng = np.random.default_rng() if rng is None else rng
        self.obs_dim = obs_dim
        self.act_dim = act_dim
        self.action_scale = float(action_scale)
        self.config = config
        self.gamma = config.gamma
        self.tau = config.tau
        hidden = tuple(config.hidden)
        dt = np.dtype(config.precision)
        self.actor = Mlp([obs_dim, *hidden, 2 * act_dim], rng=rng, dtype=dt)
        self.q1 = Mlp([obs_dim + act_dim, *hidden, 1], rng=rng, dtype=dt)
        self.q2 = Mlp([obs_dim + act_dim, *hidden, 1], rng=rng, dtype=dt)
        self.q1_target = self.q1.copy()
        self.q2_target = self.q2.copy()
        self.log_alpha = np.array([np.log(config.init_temperature)])
        self.target_entropy = -float(act_dim)
        self.actor_opt = Adam(self.actor.params, lr=config.lr)
        self.critic_opt = Adam(self.q1.params + self.q2.params, lr=config.lr)
        self.alpha_opt = Adam([self.log_alpha], lr=config.lr)
        self.updates = 0
        self.skipped_updates = 0

    @property
    def alpha(self) -> float:
        return float(np.exp(self.log_alpha[0]))

    # -- policy ---------------------------------------------------------------

    def _policy_head(self, out):
        d = self.act_dim
        mean = out[:, :d]
        tanh_raw = np.tanh(out[:, d:])
        log_std = LOG_STD_MIN + 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (tanh_raw + 1.0)
        return mean, log_std, tanh_raw

    def sample_policy(self, obs: np.ndarray, eps: np.ndarray, net: Mlp | None = None) -> PolicySample:
        """Reparameterized tanh-Gaussian sample; caches the actor forward pass."""
        net = self.actor if net is None else net
        mean, log_std, tanh_raw = self._policy_head(net.forward(obs))
        std = np.exp(log_std)
        squashed = np.tanh(mean + std * eps)
        c = self.action_scale
        logp = (np.sum(-0.5 * eps * eps - log_std - _HALF_LOG_2PI, axis=1)
                - np.sum(np.log(c * (1.0 - squashed * squashed) + _SQUASH_EPS), axis=1))
        return PolicySample(c * squashed, logp, squashed, eps, std, tanh_raw)

    def act(self, obs: np.ndarray, rng: np.random.Generator | None = None,
            deterministic: bool = False) -> np.ndarray:
        obs = np.atleast_2d(obs)
        out = self.actor.predict(obs)
        mean, log_std, _ = self._policy_head(out)
        if deterministic:
            a = np.tanh(mean)
        else:
            a = np.tanh(mean + np.exp(log_std) * rng.standard_normal(mean.shape))
        return (self.action_scale * a)[0]

    # -- losses -----------------------------------------------------------------

    def _q_input(self, obs, act):
        return np.concatenate([obs, act], axis=1)

    def critic_target(self, batch: TransitionBatch, next_eps: np.ndarray) -> np.ndarray:
        nxt = self.sample_policy(batch.s_next, next_eps)
        x = self._q_input(batch.s_next, nxt.action)
        q_next = np.minimum(self.q1_target.predict(x), self.q2_target.predict(x))[:, 0]
        soft = q_next - self.alpha * nxt.logp
        return batch.r + self.gamma * (1.0 - batch.done) * soft

    def critic_loss(self, batch: TransitionBatch, y: np.ndarray, weights: np.ndarray | None = None):
        """Weighted TD loss of both critics against fixed targets ``y``.

        Returns (loss, grads for q1 params + q2 params, mean q1).
        """
        n = len(batch)
        w = np.ones(n) if weights is None else weights
        x = self._q_input(batch.s, batch.a)
        q1 = self.q1.forward(x)[:, 0]
        g1 = self.q1.backward((2.0 * w * (q1 - y) / n)[:, None])
        q2 = self.q2.forward(x)[:, 0]
        g2 = self.q2.backward((2.0 * w * (q2 - y) / n)[:, None])
        loss = float(np.mean(w * (q1 - y) ** 2) + np.mean(w * (q2 - y) ** 2))
        return loss, g1 + g2, float(q1.mean())

    def actor_loss(self, obs: np.ndarray, eps: np.ndarray, weights: np.ndarray | None = None):
        """mean(w * (alpha * logp - min Q)); returns (loss, actor grads, logp)."""
        n = obs.shape[0]
        w = np.ones(n) if weights is None else weights
        alpha = self.alpha
        smp = self.sample_policy(obs, eps)
        x = self._q_input(obs, smp.action)
        q1 = self.q1.forward(x)[:, 0]
        dq1 = self.q1.input_gradient(np.ones((n, 1)))[:, self.obs_dim:]
        q2 = self.q2.forward(x)[:, 0]
        dq2 = self.q2.input_gradient(np.ones((n, 1)))[:, self.obs_dim:]
        use1 = (q1 <= q2)[:, None]
        q_min = np.minimum(q1, q2)
        loss = float(np.mean(w * (alpha * smp.logp - q_min)))

        c = self.action_scale
        u = smp.squashed
        g_logp = (w * alpha / n)[:, None]
        g_qmin = (-w / n)[:, None]
        d_squashed = (g_qmin * np.where(use1, dq1, dq2) * c
                      + g_logp * (2.0 * c * u / (c * (1.0 - u * u) + _SQUASH_EPS)))
        g_pre = d_squashed * (1.0 - u * u)
        g_mean = g_pre
        g_log_std = g_pre * smp.std * smp.eps - g_logp
        g_raw = g_log_std * 0.5 * (LOG_STD_MAX - LOG_STD_MIN) * (1.0 - smp.tanh_raw ** 2)
        # sample_policy cached the actor pass; the critic passes used their own caches
        grads = self.actor.backward(np.concatenate([g_mean, g_raw], axis=1))
        return loss, grads, smp.logp

    def alpha_loss(self, logp: np.ndarray):
        """mean(-log_alpha * (logp + target_entropy)); returns (loss, [grad])."""
        m = float(np.mean(logp + self.target_entropy))
        return -float(self.log_alpha[0]) * m, [np.array([-m])]

    # -- update -------------------------------------------------------------------

    def update(self, batch: TransitionBatch, rng: np.random.Generator,
               weights: np.ndarray | None = None) -> dict:
        """One critic, actor and temperature step followed by a Polyak update."""
        n = len(batch)
        next_eps = rng.standard_normal((n, self.act_dim))
        eps = rng.standard_normal((n, self.act_dim))
        diag = {"skipped": False}
        try:
            y = self.critic_target(batch, next_eps)
            c_loss, c_grads, q_mean = self.critic_loss(batch, y, weights)
            if not np.isfinite(c_loss):
                raise OptimizerError("non-finite critic loss")
            self.critic_opt.step(c_grads)
            a_loss, a_grads, logp = self.actor_loss(batch.s, eps, weights)
            if not np.isfinite(a_loss):
                raise OptimizerError("non-finite actor loss")
            self.actor_opt.step(a_grads)
            t_loss, t_grads = self.alpha_loss(logp)
            self.alpha_opt.step(t_grads)
        except (OptimizerError, FloatingPointError):
            self.skipped_updates += 1
            diag["skipped"] = True
            return diag
        polyak_update([self.q1_target.flat], [self.q1.flat], self.tau)
        polyak_update([self.q2_target.flat], [self.q2.flat], self.tau)
        self.updates += 1
        diag.update(critic_loss=c_loss, actor_loss=a_loss, alpha_loss=t_loss,
                    q_mean=q_mean, alpha=self.alpha, entropy=-float(np.mean(logp)))
        return diag

    # -- persistence --------------------------------------------------------------

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {}
        for name in ("actor", "q1", "q2", "q1_target", "q2_target"):
            for i, p in enumerate(getattr(self, name).params):
                out[f"{name}.{i}"] = p
        out["log_alpha"] = self.log_alpha
        return out

    def load_state_arrays(self, arrays) -> None:
        for name in ("actor", "q1", "q2", "q1_target", "q2_target"):
            net = getattr(self, name)
            keys = [f"{name}.{i}" for i in range(len(net.params))]
            if all(k in arrays for k in keys):
                net.load([arrays[k] for k in keys])
        if "log_alpha" in arrays:
            self.log_alpha[...] = arrays["log_alpha"]


def sac_update(agent: SacAgent, batch: TransitionBatch, rng: np.random.Generator,
               weights: np.ndarray | None = None) -> dict:
    return agent.update(batch, rng, weights)
