"""Named, independent random streams derived from one master seed.

Each consumer (Alice, Bob, Eve, the pair source, ...) gets its own
``numpy.random.Generator`` so that how much one stream is consumed never
changes what another stream produces.
"""

from __future__ import annotations

import os

import numpy as np

STREAMS = ("alice", "bob", "eve", "source", "disclosure", "scan", "table")

SEED_ENV = "QKD4_SEED"


def stream(master_seed: int, name: str) -> np.random.Generator:
    if name not in STREAMS:
        raise KeyError(f"unknown stream {name!r}; expected one of {STREAMS}")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(STREAMS.index(name),))
    return np.random.Generator(np.random.PCG64(seq))


def streams(master_seed: int) -> dict[str, np.random.Generator]:
    return {name: stream(master_seed, name) for name in STREAMS}


def resolve_seed(*candidates, default: int = 0) -> int:
    """First non-None candidate, then $QKD4_SEED, then ``default``."""
    for c in candidates:
        if c is not None:
            return int(c)
    env = os.environ.get(SEED_ENV)
    if env:
        return int(env)
    return default
