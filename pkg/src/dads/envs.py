"""Continuous-control environments with additive next-state noise.

Two base systems are provided, a torque-limited pendulum (never terminates
early) and a 2-D point mass that terminates when it leaves its box.  Each
step computes the nominal deterministic successor and then adds a noise
vector drawn per feature group (``position`` / ``velocity``).  The noisy
vector *is* the new simulator state, so injected noise propagates forward.

Source and target domains differ only in their noise specs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError, StateError

GROUPS = ("position", "velocity")
OVERLAP_LEVELS = ("large", "medium", "small")
ENV_IDS = ("pendulum", "point-mass")

HORIZON = 200

# Target noise mean per overlap level (position +m, velocity -m), std fixed.
_TARGET_SHIFT = {"large": 0.015, "medium": 0.02, "small": 0.025}
_TARGET_STD = 0.004
_SOURCE_HALF_WIDTH = 0.02

# Multiplier applied to the table noise so it is comparable to per-step
# state changes of each system (see README, "Noise scaling").
DEFAULT_NOISE_SCALE = {"pendulum": 5.0, "point-mass": 1.0}


@dataclass(frozen=True)
class NoiseSpec:
    """Distribution of the additive noise on one feature group.

    ``kind`` is ``"uniform"`` (params lo, hi), ``"gaussian"`` (mean, std) or
    ``"none"`` (no noise).
    """

    group: str
    kind: str
    a: float = 0.0
    b: float = 0.0

    def __post_init__(self):
        if self.group not in GROUPS:
            raise ConfigurationError(f"unknown feature group {self.group!r}")
        if self.kind == "uniform":
            if not self.a < self.b:
                raise ConfigurationError(f"uniform noise needs lo < hi, got ({self.a}, {self.b})")
        elif self.kind == "gaussian":
            if not self.b > 0:
                raise ConfigurationError(f"gaussian noise needs std > 0, got {self.b}")
        elif self.kind != "none":
            raise ConfigurationError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def uniform(cls, group, lo, hi):
        return cls(group, "uniform", float(lo), float(hi))

    @classmethod
    def gaussian(cls, group, mean, std):
        return cls(group, "gaussian", float(mean), float(std))

    @classmethod
    def none(cls, group):
        return cls(group, "none")

    def sample(self, rng: np.random.Generator, size, scale: float = 1.0) -> np.ndarray:
        if self.kind == "uniform":
            return scale * rng.uniform(self.a, self.b, size)
        if self.kind == "gaussian":
            return scale * rng.normal(self.a, self.b, size)
        return np.zeros(size)

    def support(self, scale: float = 1.0) -> tuple[float, float]:
        """Interval holding all the mass (gaussian: the whole line)."""
        if self.kind == "uniform":
            return scale * self.a, scale * self.b
        if self.kind == "gaussian":
            return -math.inf, math.inf
        return 0.0, 0.0

    def __str__(self):
        if self.kind == "uniform":
            return f"{self.group}:U({self.a:g},{self.b:g})"
        if self.kind == "gaussian":
            return f"{self.group}:N({self.a:g},{self.b:g})"
        return f"{self.group}:none"


def _as_noise_map(specs: Sequence[NoiseSpec]) -> dict[str, NoiseSpec]:
    out = {}
    for spec in specs:
        if spec.group in out:
            raise ConfigurationError(f"duplicate noise spec for group {spec.group!r}")
        out[spec.group] = spec
    missing = set(GROUPS) - set(out)
    if missing:
        raise ConfigurationError(f"missing noise spec for groups {sorted(missing)}")
    return out


@dataclass(frozen=True)
class DomainPair:
    env_id: str
    source_noise: tuple[NoiseSpec, ...]
    target_noise: tuple[NoiseSpec, ...]
    overlap_level: str
    noise_scale: float = 1.0

    def make_source(self, rng, horizon=HORIZON) -> "NoisyEnv":
        return make_env(self.env_id, self.source_noise, rng, self.noise_scale, horizon)

    def make_target(self, rng, horizon=HORIZON) -> "NoisyEnv":
        return make_env(self.env_id, self.target_noise, rng, self.noise_scale, horizon)


@dataclass
class StepResult:
    next_state: np.ndarray
    reward: float
    done: bool
    truncated: bool = False


class NoisyEnv:
    """Base class: subclasses define the nominal dynamics, reward and reset.

    Instances own their generator; two instances built with identically
    seeded generators produce identical trajectories.
    """

    env_id: str = ""
    state_dim: int = 0
    action_dim: int = 0
    action_high: float = 1.0
    feature_groups: tuple[str, ...] = ()

    def __init__(self, noise: Sequence[NoiseSpec], rng: np.random.Generator,
                 noise_scale: float = 1.0, horizon: int = HORIZON):
        self.noise = _as_noise_map(noise)
        self.noise_scale = float(noise_scale)
        self.rng = rng
        self.horizon = int(horizon)
        self.state: np.ndarray | None = None
        self.elapsed = 0
        self.terminated = False
        self._group_index = {
            g: np.array([i for i, fg in enumerate(self.feature_groups) if fg == g], dtype=int)
            for g in GROUPS
        }

    # subclass hooks
    def nominal_step(self, state: np.ndarray, action: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def reward(self, state: np.ndarray, action: np.ndarray) -> float:
        raise NotImplementedError

    def is_terminal(self, state: np.ndarray) -> bool:
        return False

    def initial_state(self) -> np.ndarray:
        raise NotImplementedError

    def sample_noise(self) -> np.ndarray:
        """One noise vector; groups are drawn in fixed order (position, velocity)."""
        xi = np.empty(self.state_dim)
        for g in GROUPS:
            idx = self._group_index[g]
            xi[idx] = self.noise[g].sample(self.rng, idx.size, self.noise_scale)
        return xi

    def reset(self) -> np.ndarray:
        self.state = self.initial_state()
        self.elapsed = 0
        self.terminated = False
        return self.state.copy()

    def step(self, action) -> StepResult:
        if self.state is None:
            raise StateError("step() called before reset()")
        if self.terminated or self.elapsed >= self.horizon:
            raise StateError("episode is over; call reset()")
        action = np.asarray(action, dtype=float).reshape(self.action_dim)
        if not np.all(np.isfinite(action)):
            raise DomainError(f"non-finite action {action}")
        action = np.clip(action, -self.action_high, self.action_high)
        r = self.reward(self.state, action)
        nxt = self.nominal_step(self.state, action) + self.sample_noise()
        self.state = nxt
        self.elapsed += 1
        self.terminated = bool(self.is_terminal(nxt))
        return StepResult(nxt.copy(), float(r), self.terminated,
                          (not self.terminated) and self.elapsed >= self.horizon)

    def random_action(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(-self.action_high, self.action_high, self.action_dim)


class Pendulum(NoisyEnv):
    """Swing-up pendulum; state (cos th, sin th, th_dot), torque in [-2, 2]."""

    env_id = "pendulum"
    state_dim = 3
    action_dim = 1
    action_high = 2.0
    feature_groups = ("position", "position", "velocity")

    max_speed = 8.0
    dt = 0.05
    g = 10.0
    m = 1.0
    length = 1.0

    def nominal_step(self, state, action):
        th = math.atan2(state[1], state[0])
        thdot = state[2]
        u = action[0]
        thdot = thdot + (3 * self.g / (2 * self.length) * math.sin(th)
                         + 3.0 / (self.m * self.length ** 2) * u) * self.dt
        thdot = min(max(thdot, -self.max_speed), self.max_speed)
        th = th + thdot * self.dt
        return np.array([math.cos(th), math.sin(th), thdot])

    def reward(self, state, action):
        th = math.atan2(state[1], state[0])
        return -(th ** 2 + 0.1 * state[2] ** 2 + 0.001 * action[0] ** 2)

    def initial_state(self):
        th = self.rng.uniform(-math.pi, math.pi)
        thdot = self.rng.uniform(-1.0, 1.0)
        return np.array([math.cos(th), math.sin(th), thdot])


class PointMass(NoisyEnv):
    """Point mass in the box [-1, 1]^2 reaching a fixed goal.

    State (x, y, vx, vy), acceleration action in [-1, 1]^2, reward minus the
    distance to the goal, terminates once the position leaves the box.
    """

    env_id = "point-mass"
    state_dim = 4
    action_dim = 2
    action_high = 1.0
    feature_groups = ("position", "position", "velocity", "velocity")

    dt = 0.1
    bound = 1.0
    goal = np.array([0.5, 0.5])

    def nominal_step(self, state, action):
        vel = state[2:] + self.dt * action
        pos = state[:2] + self.dt * vel
        return np.concatenate([pos, vel])

    def reward(self, state, action):
        return -float(np.hypot(state[0] - self.goal[0], state[1] - self.goal[1]))

    def is_terminal(self, state):
        return bool(np.any(np.abs(state[:2]) > self.bound))

    def initial_state(self):
        return np.concatenate([self.rng.uniform(-0.1, 0.1, 2), np.zeros(2)])


_ENVS = {"pendulum": Pendulum, "point-mass": PointMass}


def make_env(env_id, noise, rng, noise_scale=None, horizon=HORIZON) -> NoisyEnv:
    if env_id not in _ENVS:
        raise ConfigurationError(f"unknown environment {env_id!r}; expected one of {ENV_IDS}")
    if noise_scale is None:
        noise_scale = DEFAULT_NOISE_SCALE[env_id]
    return _ENVS[env_id](noise, rng, noise_scale, horizon)


def source_noise() -> tuple[NoiseSpec, NoiseSpec]:
    w = _SOURCE_HALF_WIDTH
    return NoiseSpec.uniform("position", -w, w), NoiseSpec.uniform("velocity", -w, w)


def target_noise(overlap_level: str) -> tuple[NoiseSpec, NoiseSpec]:
    if overlap_level not in _TARGET_SHIFT:
        raise ConfigurationError(f"unknown overlap level {overlap_level!r}")
    m = _TARGET_SHIFT[overlap_level]
    return (NoiseSpec.gaussian("position", m, _TARGET_STD),
            NoiseSpec.gaussian("velocity", -m, _TARGET_STD))


def make_domain_pair(base_env_id: str, overlap_level: str, seed: int = 0,
                     noise_scale: float | None = None) -> DomainPair:
    """Source/target pair for ``base_env_id`` at the given overlap level.

    The source spec is the same at every level; the target means move out of
    the source support as the overlap shrinks.  ``seed`` is accepted for
    interface symmetry: the pair is a pure function of its arguments.
    """
    del seed
    if base_env_id not in _ENVS:
        raise ConfigurationError(f"unknown environment {base_env_id!r}; expected one of {ENV_IDS}")
    if noise_scale is None:
        noise_scale = DEFAULT_NOISE_SCALE[base_env_id]
    return DomainPair(base_env_id, source_noise(), target_noise(overlap_level),
                      overlap_level, float(noise_scale))


def run_episode(env: NoisyEnv, policy: Callable[[np.ndarray], np.ndarray]) -> float:
    s = env.reset()
    total = 0.0
    while True:
        res = env.step(policy(s))
        total += res.reward
        if res.done or res.truncated:
            return total
        s = res.next_state


def evaluate_policy(env: NoisyEnv, policy: Callable[[np.ndarray], np.ndarray],
                    n_episodes: int = 10) -> tuple[float, float]:
    """Mean and sample std of the undiscounted return over ``n_episodes``."""
    if n_episodes < 1:
        raise ConfigurationError("n_episodes must be >= 1")
    returns = np.array([run_episode(env, policy) for _ in range(n_episodes)])
    if n_episodes == 1 or np.all(returns == returns[0]):
        std = 0.0  # exact, not a rounding residue of the mean
    else:
        std = float(returns.std(ddof=1))
    return float(returns.mean()), std
