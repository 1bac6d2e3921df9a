"""Seeded random streams.

Every stochastic routine takes an explicit ``numpy.random.Generator``. Streams
are PCG64 generators keyed by ``(seed, *path)`` through ``SeedSequence``
spawn keys, so trial ``i`` of a suite gets the same stream no matter how many
workers run the suite or in which order.
"""

from __future__ import annotations

import numpy as np


def make_rng(seed: int, *path: int) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.PCG64(ss))
