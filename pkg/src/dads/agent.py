"""The DADS training loop and its baseline variants.

One call to :meth:`Trainer.step` is one iteration of the online loop:

1. one source-environment step, stored in the prioritized source buffer;
2. every ``ratio`` iterations, one target-environment step;
3. N source transitions drawn proportionally to their priority, and those
   priorities refreshed with the current source/target classifier pair;
4. N target transitions drawn uniformly and mixed with the source batch;
5. rewards of the source and mixed transitions shifted by the modified
   source/target log-ratio (after warm-up);
6. one step on each classifier pair and one SAC update on the modified batch.

Baselines reuse the same loop with components switched off (see
:data:`METHOD_SPECS`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import rng as rngs
from .config import ClassifierConfig, ExperimentConfig, TrainConfig
from .envs import DomainPair, NoisyEnv, evaluate_policy, make_domain_pair
from .errors import ConfigurationError
from .mixup import MixupConfig, mix_batch
from .ratio import ClassifierPair
from .sac import SacAgent, SacConfig
from .skew import PrioritizedBuffer
from .transitions import ReplayBuffer, Transition, TransitionBatch


@dataclass(frozen=True)
class MethodSpec:
    skew: bool = False
    mixup: bool = False
    # reward shift: "phi" (modified source vs target), "theta" (source vs target), "none"
    correction: str = "none"
    importance_weights: bool = False
    # "both": online loop over two domains; "source" / "target": plain SAC on one
    # domain; "finetune": source phase then target phase
    domains: str = "both"

    @property
    def uses_theta(self) -> bool:
        return self.domains == "both"

    @property
    def uses_phi(self) -> bool:
        return self.correction == "phi"


METHOD_SPECS = {
    "dads": MethodSpec(skew=True, mixup=True, correction="phi"),
    "dads_no_skew": MethodSpec(skew=False, mixup=True, correction="phi"),
    "dads_no_mixup": MethodSpec(skew=True, mixup=False, correction="phi"),
    "darc": MethodSpec(correction="theta"),
    "iw": MethodSpec(importance_weights=True),
    "rl_source": MethodSpec(domains="source"),
    "rl_target": MethodSpec(domains="target"),
    "finetune": MethodSpec(domains="finetune"),
}


def method_spec(method: str) -> MethodSpec:
    try:
        return METHOD_SPECS[method]
    except KeyError:
        raise ConfigurationError(f"unknown method {method!r}; expected one of {tuple(METHOD_SPECS)}") from None


@dataclass
class EvalRecord:
    step: int
    seed: int
    method: str
    env: str
    overlap: str
    return_mean: float
    return_std: float
    mean_delta_r: float = math.nan
    mean_priority: float = math.nan
    cls_loss_theta: float = math.nan
    cls_loss_phi: float = math.nan


@dataclass
class Counters:
    source_steps: int = 0
    target_steps: int = 0
    policy_updates: int = 0
    theta_updates: int = 0
    phi_updates: int = 0
    mixup_calls: int = 0
    full_refreshes: int = 0


@dataclass
class _Running:
    """Interval averages reported at each evaluation."""

    sums: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def add(self, key, value, n=1):
        self.sums[key] = self.sums.get(key, 0.0) + value
        self.counts[key] = self.counts.get(key, 0) + n

    def pop(self, key):
        n = self.counts.pop(key, 0)
        s = self.sums.pop(key, 0.0)
        return s / n if n else math.nan


class _Rollout:
    """An environment plus its current observation, reset on episode end."""

    def __init__(self, env: NoisyEnv):
        self.env = env
        self.obs = env.reset()

    def step(self, action) -> Transition:
        res = self.env.step(action)
        t = Transition(self.obs, np.asarray(action, float), res.reward, res.next_state, res.done)
        self.obs = self.env.reset() if (res.done or res.truncated) else res.next_state
        return t


class Trainer:
    """Mutable state of one training run (one method, one seed)."""

    def __init__(self, train: TrainConfig, pair: DomainPair, seed: int,
                 sac: SacConfig = SacConfig(), classifier: ClassifierConfig = ClassifierConfig()):
        self.cfg = train
        self.spec = method_spec(train.method)
        self.pair = pair
        self.seed = int(seed)
        self.rng_agent = rngs.stream(seed, "agent")
        self.rng_cls = rngs.stream(seed, "classifier")
        self.rng_mix = rngs.stream(seed, "mixup")
        self.rng_sample = rngs.stream(seed, "sampling")
        init = rngs.stream(seed, "init")

        self.source = _Rollout(pair.make_source(rngs.stream(seed, "env_source"), train.horizon))
        self.target = _Rollout(pair.make_target(rngs.stream(seed, "env_target"), train.horizon))
        self.eval_rng = rngs.stream(seed, "env_eval")
        env = self.source.env
        self.state_dim, self.action_dim = env.state_dim, env.action_dim
        self.action_high = env.action_high

        self.agent = SacAgent(self.state_dim, self.action_dim, env.action_high, sac, rng=init)
        cap = min(train.buffer_capacity, train.total_steps)
        if self.spec.uses_theta:
            self.src_buf: ReplayBuffer = PrioritizedBuffer(cap, self.state_dim, self.action_dim, mu=train.mu)
        else:
            self.src_buf = ReplayBuffer(cap, self.state_dim, self.action_dim)
        self.tar_buf = ReplayBuffer(cap, self.state_dim, self.action_dim)

        def make_pair():
            return ClassifierPair(self.state_dim, self.action_dim, hidden=classifier.hidden,
                                  lr=classifier.lr, input_noise_std=classifier.input_noise_std,
                                  logit_clip=classifier.logit_clip, rng=init,
                                  dtype=np.dtype(classifier.precision))

        self.theta = make_pair() if self.spec.uses_theta else None
        self.phi = make_pair() if self.spec.uses_phi else None
        self.cls_half = classifier.batch_size // 2
        self.logit_clip = classifier.logit_clip
        self.mixup = MixupConfig(train.mixup_alpha, enabled=self.spec.mixup)
        self.finetune_switch = int(round((1.0 - train.finetune_fraction) * train.total_steps))
        self.counters = Counters()
        self.running = _Running()
        self.t = 0

    # -- acting -----------------------------------------------------------------

    def _action(self, obs, env: NoisyEnv, buffer_len: int):
        if self.t <= self.cfg.seed_steps or buffer_len == 0:
            return env.random_action(self.rng_agent)
        return self.agent.act(obs, self.rng_agent)

    def _source_step(self):
        tr = self.source.step(self._action(self.source.obs, self.source.env, len(self.src_buf)))
        self.counters.source_steps += 1
        if isinstance(self.src_buf, PrioritizedBuffer):
            lr = 0.0
            if self.theta.steps > 0:
                lr = float(self.theta.log_ratio(tr.s, tr.a, tr.s_next)[0])
            self.src_buf.push(tr, lr)
        else:
            self.src_buf.push(tr)

    def _target_step(self, buffer: ReplayBuffer):
        tr = self.target.step(self._action(self.target.obs, self.target.env, len(buffer)))
        self.counters.target_steps += 1
        buffer.push(tr)

    # -- one iteration ------------------------------------------------------------

    def step(self) -> None:
        self.t += 1
        mode = self.spec.domains
        if mode == "both":
            self._joint_step()
        elif mode == "source" or (mode == "finetune" and self.t <= self.finetune_switch):
            self._source_step()
            self._plain_update(self.src_buf)
        else:
            self._target_step(self.tar_buf)
            self._plain_update(self.tar_buf)

    def _plain_update(self, buffer: ReplayBuffer):
        if self.t <= self.cfg.seed_steps or len(buffer) == 0:
            return
        if self.spec.domains == "finetune" and buffer is self.tar_buf and len(buffer) < self.cfg.batch_size:
            return
        batch, _ = buffer.sample_uniform(self.cfg.batch_size, self.rng_sample)
        self._sac(batch)

    def _sac(self, batch, weights=None):
        diag = self.agent.update(batch, self.rng_agent, weights)
        if not diag["skipped"]:
            self.counters.policy_updates += 1

    def _joint_step(self):
        cfg, spec = self.cfg, self.spec
        self._source_step()
        if self.t % cfg.ratio == 0:
            self._target_step(self.tar_buf)
        if self.t <= cfg.seed_steps or len(self.tar_buf) == 0:
            return
        n = cfg.batch_size
        buf: PrioritizedBuffer = self.src_buf  # type: ignore[assignment]

        if spec.skew:
            src, ids = buf.sample_batch(n, self.rng_sample)
        else:
            src, ids = buf.sample_uniform(n, self.rng_sample)
        if self.theta.steps > 0:
            buf.update_priorities(ids, self.theta.log_ratio(src.s, src.a, src.s_next))
        tar, _ = self.tar_buf.sample_uniform(n, self.rng_sample)

        if spec.mixup:
            mixed = mix_batch(src, tar, self.mixup, self.rng_mix)
            self.counters.mixup_calls += 1
            modified = TransitionBatch.concat(src, mixed)
        else:
            modified = src

        corrected = self.t > cfg.warmup_steps
        weights = None
        if spec.correction == "phi":
            dr = self.phi.log_ratio(modified.s, modified.a, modified.s_next) if corrected else np.zeros(len(modified))
            modified = modified.with_rewards(modified.r + dr)
            self.running.add("delta_r", float(dr.sum()), len(dr))
        elif spec.correction == "theta":
            dr = self.theta.log_ratio(modified.s, modified.a, modified.s_next) if corrected else np.zeros(len(modified))
            modified = modified.with_rewards(modified.r + dr)
            self.running.add("delta_r", float(dr.sum()), len(dr))
        elif spec.importance_weights:
            if corrected:
                dr = self.theta.log_ratio(modified.s, modified.a, modified.s_next)
                c = self.logit_clip
                weights = np.exp(np.clip(dr, -c, c))
            else:
                dr = np.zeros(len(modified))
                weights = np.ones(len(modified))
            self.running.add("delta_r", float(dr.sum()), len(dr))

        h = self.cls_half
        s_cls, _ = buf.sample_uniform(h, self.rng_sample)
        t_cls, _ = self.tar_buf.sample_uniform(h, self.rng_sample)
        loss = self.theta.train_step(s_cls.sas(), t_cls.sas(), self.rng_cls)
        self.counters.theta_updates += 1
        self.running.add("cls_theta", loss)
        if self.phi is not None:
            pick = self.rng_sample.integers(len(modified), size=h)
            t_phi, _ = self.tar_buf.sample_uniform(h, self.rng_sample)
            loss = self.phi.train_step(modified[pick].sas(), t_phi.sas(), self.rng_cls)
            self.counters.phi_updates += 1
            self.running.add("cls_phi", loss)

        self._sac(modified, weights)

        if self.t % cfg.refresh_interval == 0:
            buf.refresh_all(self.theta.log_ratio)
            self.counters.full_refreshes += 1

    # -- evaluation ---------------------------------------------------------------

    def policy(self, obs):
        return self.agent.act(obs, deterministic=True)

    def evaluate(self, n_episodes: int) -> tuple[float, float]:
        env = self.pair.make_target(self.eval_rng, self.cfg.horizon)
        return evaluate_policy(env, self.policy, n_episodes)

    def record(self, n_episodes: int, env_id: str, overlap: str) -> EvalRecord:
        mean, std = self.evaluate(n_episodes)
        prio = math.nan
        if isinstance(self.src_buf, PrioritizedBuffer) and len(self.src_buf):
            prio = self.src_buf.tree.total / len(self.src_buf)
        return EvalRecord(self.t, self.seed, self.cfg.method, env_id, overlap, mean, std,
                          self.running.pop("delta_r"), prio,
                          self.running.pop("cls_theta"), self.running.pop("cls_phi"))


def dads_step(trainer: Trainer) -> Trainer:
    trainer.step()
    return trainer


def train(config: ExperimentConfig, seed: int, pair: DomainPair | None = None,
          on_record=None, on_start=None) -> tuple[Trainer, list[EvalRecord]]:
    """Run one (method, seed) to completion, evaluating every ``eval_interval`` steps.

    ``on_start(trainer)`` is called once before the first step and
    ``on_record(record)`` after each evaluation.
    """
    if pair is None:
        pair = make_domain_pair(config.env, config.overlap, seed, config.noise_scale)
    trainer = Trainer(config.train, pair, seed, config.sac, config.classifier)
    if on_start is not None:
        on_start(trainer)
    records = []
    for _ in range(config.train.total_steps):
        trainer.step()
        if trainer.t % config.eval_interval == 0:
            rec = trainer.record(config.eval_episodes, config.env, config.overlap)
            records.append(rec)
            if on_record is not None:
                on_record(rec)
    return trainer, records


def run_baseline(config: ExperimentConfig, domain_pair: DomainPair, seed: int) -> list[EvalRecord]:
    return train(config, seed, domain_pair)[1]
