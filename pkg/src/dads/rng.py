"""Named, independent random streams derived from one integer seed."""

import numpy as np

STREAMS = (
    "env_source",
    "env_target",
    "env_eval",
    "agent",
    "classifier",
    "mixup",
    "sampling",
    "init",
)


def stream(seed: int, name: str) -> np.random.Generator:
    """Return the generator for sub-stream ``name`` of ``seed``.

    Streams are spawned children of one ``SeedSequence``, so they are
    statistically independent and identical on every platform.
    """
    if name not in STREAMS:
        raise KeyError(f"unknown random stream {name!r}")
    seq = np.random.SeedSequence(int(seed), spawn_key=(STREAMS.index(name),))
    return np.random.Generator(np.random.PCG64(seq))
