"""Deterministic random substreams.

Every random draw in the package comes from a generator keyed by a master
seed plus a tuple of integers (replicate index, population, ...).  Two
streams with different keys are statistically independent, and a stream
does not depend on which other streams were consumed before it, so work can
be scheduled in any order or in parallel without changing results.
"""

from __future__ import annotations

import numpy as np

# Fixed key prefixes, so that streams used for different purposes never collide.
SPLIT = 0
BOOTSTRAP = 1
DATA = 2
TEST = 3


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return the generator for ``(seed, key)``."""
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed: int, *key: int) -> int:
    """Derive a child integer seed (63 bits) from ``(seed, key)``."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    hi, lo = ss.generate_state(2, dtype=np.uint32)
    return ((int(hi) << 32) | int(lo)) >> 1
