"""Deterministic random streams.

Every replicate gets its own Philox (counter-based) generator keyed by
``(master_seed, replicate, purpose)`` through :class:`numpy.random.SeedSequence`,
so results never depend on the order or thread in which replicates run.
"""
from __future__ import annotations

import numpy as np

# substream purposes
INIT = 0
MOTION = 1
THINNING = 2
EXTRA = 3

MASK64 = (1 << 64) - 1


def stream(master_seed: int, *key: int) -> np.random.Generator:
    seq = np.random.SeedSequence(entropy=int(master_seed) & MASK64,
                                 spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(seq))


def replicate_streams(master_seed: int, replicate: int) -> dict[str, np.random.Generator]:
    return {
        "init": stream(master_seed, replicate, INIT),
        "motion": stream(master_seed, replicate, MOTION),
        "thinning": stream(master_seed, replicate, THINNING),
    }
