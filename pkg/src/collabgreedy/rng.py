"""Counter-style seed derivation.

Every random stream is keyed by ``(seed, stream_tag, *counters)`` through
numpy's ``SeedSequence``, so a stream never depends on how many numbers
another stream consumed. This is what makes runs independent of policy
choice (common random numbers) and of worker count.
"""
from __future__ import annotations

import numpy as np

# stream tags; values are part of the reproducibility contract
POPULATION = 1
ASSIGNMENT = 2
RATINGS = 3
SIGMA = 4
ACTION = 5
TIE_BREAK = 6
EXPLORE = 7
TRIAL = 8


def derive(seed: int, *keys: int) -> np.random.Generator:
    """Return a generator for the stream identified by ``(seed, *keys)``."""
    if seed < 0 or any(k < 0 for k in keys):
        raise ValueError("seeds and stream keys must be non-negative")
    return np.random.default_rng([int(seed), *map(int, keys)])
