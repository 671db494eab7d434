"""Experiment configuration and its flat ``section.key = value`` file format.

Example::

    # comments and blank lines are ignored
    experiment.env = pendulum
    experiment.overlap = small
    experiment.seeds = 0,1,2,3,4
    train.method = dads
    train.mu = 1.0
    sac.hidden = 64,64

Every key must name an existing field; unknown keys are errors.
"""

from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .envs import ENV_IDS, OVERLAP_LEVELS
from .errors import ConfigurationError
from .sac import SacConfig

METHODS = ("dads", "darc", "iw", "finetune", "rl_source", "rl_target",
           "dads_no_skew", "dads_no_mixup")
MU_GRID = (0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0, 2.0, 4.0)


@dataclass(frozen=True)
class TrainConfig:
    """Training-loop hyperparameters (method, budget, skew, mixup)."""

    method: str = "dads"
    total_steps: int = 100_000
    ratio: int = 10  # one target step every `ratio` source steps
    batch_size: int = 128
    warmup_steps: int = 10_000  # reward correction disabled up to here
    seed_steps: int = 1_000  # uniform-random actions, no updates
    mu: float = 1.0
    mixup_alpha: float = 0.2
    refresh_interval: int = 10_000  # full priority refresh period
    buffer_capacity: int = 1_000_000
    finetune_fraction: float = 0.1
    horizon: int = 200


@dataclass(frozen=True)
class ClassifierConfig:
    hidden: tuple[int, ...] = (32, 32)
    lr: float = 3e-4
    batch_size: int = 128  # split evenly between the two domains
    input_noise_std: float = 1.0
    logit_clip: float = 10.0
    precision: str = "float32"


@dataclass(frozen=True)
class ExperimentConfig:
    env: str = "pendulum"
    overlap: str = "small"
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    eval_interval: int = 5_000
    eval_episodes: int = 10
    noise_scale: typing.Optional[float] = None  # None: environment default
    train: TrainConfig = field(default_factory=TrainConfig)
    sac: SacConfig = field(default_factory=SacConfig)
    classifier: ClassifierConfig = field(default_factory=ClassifierConfig)

    @property
    def method(self) -> str:
        return self.train.method

    def replace(self, **changes) -> "ExperimentConfig":
        """dataclasses.replace that also accepts dotted keys ('train.mu')."""
        top, nested = {}, {}
        for key, value in changes.items():
            if "." in key:
                section, name = key.split(".", 1)
                nested.setdefault(section, {})[name] = value
            else:
                top[key] = value
        for section, vals in nested.items():
            top[section] = dataclasses.replace(getattr(self, section), **vals)
        out = dataclasses.replace(self, **top)
        validate(out)
        return out


_SECTIONS = {"train": TrainConfig, "sac": SacConfig, "classifier": ClassifierConfig}


def _hints(cls):
    return typing.get_type_hints(cls)


def _format(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ",".join(_format(v) for v in value)
    return str(value)


def _parse(text: str, hint, key: str):
    text = text.strip()
    origin = typing.get_origin(hint)
    try:
        if origin is typing.Union:
            args = [a for a in typing.get_args(hint) if a is not type(None)]
            if text.lower() == "none":
                return None
            return _parse(text, args[0], key)
        if origin is tuple:
            (elem, _ellipsis) = typing.get_args(hint)
            if not text:
                return ()
            return tuple(_parse(part, elem, key) for part in text.split(","))
        if hint is bool:
            if text.lower() in ("true", "1", "yes"):
                return True
            if text.lower() in ("false", "0", "no"):
                return False
            raise ValueError(text)
        if hint is int:
            return int(text)
        if hint is float:
            return float(text)
        if hint is str:
            return text
    except ValueError as exc:
        raise ConfigurationError(f"bad value for {key}: {text!r}") from exc
    raise ConfigurationError(f"unsupported field type for {key}: {hint}")


def to_items(config: ExperimentConfig) -> list[tuple[str, str]]:
    items = []
    for f in dataclasses.fields(ExperimentConfig):
        value = getattr(config, f.name)
        if f.name in _SECTIONS:
            for sub in dataclasses.fields(_SECTIONS[f.name]):
                items.append((f"{f.name}.{sub.name}", _format(getattr(value, sub.name))))
        else:
            items.append((f"experiment.{f.name}", _format(value)))
    return items


def dumps(config: ExperimentConfig) -> str:
    return "".join(f"{k} = {v}\n" for k, v in to_items(config))


def loads(text: str, base: ExperimentConfig | None = None) -> ExperimentConfig:
    """Parse a config file; keys not mentioned keep ``base``'s values."""
    base = ExperimentConfig() if base is None else base
    top_hints = _hints(ExperimentConfig)
    changes: dict[str, object] = {}
    seen: set[str] = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if "." not in key:
            raise ConfigurationError(f"line {lineno}: key {key!r} lacks a section")
        if key in seen:
            raise ConfigurationError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        section, name = key.split(".", 1)
        if section == "experiment":
            if name not in top_hints or name in _SECTIONS:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            changes[name] = _parse(value, top_hints[name], key)
        elif section in _SECTIONS:
            hints = _hints(_SECTIONS[section])
            if name not in hints:
                raise ConfigurationError(f"line {lineno}: unknown key {key!r}")
            changes[key] = _parse(value, hints[name], key)
        else:
            raise ConfigurationError(f"line {lineno}: unknown section {section!r}")
    return base.replace(**changes)


def load(path) -> ExperimentConfig:
    return loads(Path(path).read_text())


def save(config: ExperimentConfig, path) -> None:
    Path(path).write_text(dumps(config))


def validate(cfg: ExperimentConfig) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigurationError(msg)

    t, s, c = cfg.train, cfg.sac, cfg.classifier
    need(cfg.env in ENV_IDS, f"unknown env {cfg.env!r}; expected one of {ENV_IDS}")
    need(cfg.overlap in OVERLAP_LEVELS, f"unknown overlap {cfg.overlap!r}")
    need(len(cfg.seeds) >= 1, "seeds list must not be empty")
    need(len(set(cfg.seeds)) == len(cfg.seeds), "seeds must be distinct")
    need(cfg.eval_interval >= 1, "eval_interval must be >= 1")
    need(cfg.eval_episodes >= 1, "eval_episodes must be >= 1")
    need(cfg.noise_scale is None or cfg.noise_scale >= 0, "noise_scale must be >= 0")
    need(t.method in METHODS, f"unknown method {t.method!r}; expected one of {METHODS}")
    need(t.total_steps >= 1, "total_steps must be >= 1")
    need(t.ratio >= 1, "ratio must be >= 1")
    need(t.batch_size >= 1, "batch_size must be >= 1")
    need(0 <= t.warmup_steps <= t.total_steps, "warmup_steps must lie in [0, total_steps]")
    need(0 <= t.seed_steps <= t.total_steps, "seed_steps must lie in [0, total_steps]")
    need(t.mu >= 0, "mu must be >= 0")
    need(t.mixup_alpha > 0, "mixup_alpha must be > 0")
    need(t.refresh_interval >= 1, "refresh_interval must be >= 1")
    need(t.buffer_capacity >= 1, "buffer_capacity must be >= 1")
    need(0 < t.finetune_fraction < 1, "finetune_fraction must lie in (0, 1)")
    need(t.horizon >= 1, "horizon must be >= 1")
    need(0 <= s.gamma < 1, "gamma must lie in [0, 1)")
    need(0 < s.tau <= 1, "tau must lie in (0, 1]")
    need(s.lr > 0 and c.lr > 0, "learning rates must be positive")
    need(s.init_temperature > 0, "init_temperature must be positive")
    need(len(s.hidden) >= 1 and min(s.hidden) >= 1, "sac.hidden needs positive widths")
    need(len(c.hidden) >= 1 and min(c.hidden) >= 1, "classifier.hidden needs positive widths")
    need(c.batch_size >= 2 and c.batch_size % 2 == 0, "classifier.batch_size must be even and >= 2")
    need(c.input_noise_std >= 0, "input_noise_std must be >= 0")
    need(c.logit_clip > 0, "logit_clip must be positive")
    for name, prec in (("sac", s.precision), ("classifier", c.precision)):
        need(prec in ("float32", "float64"), f"{name}.precision must be float32 or float64")
