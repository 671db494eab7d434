"""Convex interpolation of source and target transitions."""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigurationError, InputError
from .transitions import Transition, TransitionBatch


@dataclass(frozen=True)
class MixupConfig:
    alpha: float = 0.2
    enabled: bool = True

    def __post_init__(self):
        if not self.alpha > 0:
            raise ConfigurationError(f"mixup alpha must be positive, got {self.alpha}")


def sample_lambda(config: MixupConfig, rng: np.random.Generator, size=None):
    return rng.beta(config.alpha, config.alpha, size)


def mix(src: Transition, tar: Transition, lam: float) -> Transition:
    """lam * src + (1 - lam) * tar; a terminal on either side returns ``tar``."""
    if not 0.0 <= lam <= 1.0:
        raise InputError(f"lambda must lie in [0, 1], got {lam}")
    s1, s2 = np.asarray(src.s, float), np.asarray(tar.s, float)
    a1, a2 = np.atleast_1d(np.asarray(src.a, float)), np.atleast_1d(np.asarray(tar.a, float))
    if s1.shape != s2.shape or a1.shape != a2.shape or np.shape(src.s_next) != np.shape(tar.s_next):
        raise InputError("source and target transitions have different shapes")
    if src.done or tar.done:
        return replace(tar)
    return Transition(
        s=lam * s1 + (1 - lam) * s2,
        a=lam * a1 + (1 - lam) * a2,
        r=lam * src.r + (1 - lam) * tar.r,
        s_next=lam * np.asarray(src.s_next, float) + (1 - lam) * np.asarray(tar.s_next, float),
        done=False,
    )


def mix_rows(src: TransitionBatch, tar: TransitionBatch, lam: np.ndarray) -> TransitionBatch:
    """Row-wise mix with given lambdas; terminal rows are copied from ``tar``."""
    if len(src) != len(tar):
        raise InputError(f"batch sizes differ: {len(src)} vs {len(tar)}")
    if src.s.shape != tar.s.shape or src.a.shape != tar.a.shape:
        raise InputError("source and target batches have different shapes")
    lam = np.asarray(lam, dtype=float)
    keep = src.done | tar.done
    w = np.where(keep, 0.0, lam)
    wc = w[:, None]
    return TransitionBatch(
        s=wc * src.s + (1 - wc) * tar.s,
        a=wc * src.a + (1 - wc) * tar.a,
        r=w * src.r + (1 - w) * tar.r,
        s_next=wc * src.s_next + (1 - wc) * tar.s_next,
        done=np.where(keep, tar.done, False),
    )


def mix_batch(src: TransitionBatch, tar: TransitionBatch, config: MixupConfig,
              rng: np.random.Generator) -> TransitionBatch:
    """Pair rows positionally, one independent Beta(alpha, alpha) draw per pair."""
    if len(src) != len(tar):
        raise InputError(f"batch sizes differ: {len(src)} vs {len(tar)}")
    lam = sample_lambda(config, rng, len(src))
    return mix_rows(src, tar, lam)
