"""Reproducible random streams derived from one master seed.

Every stream is a PCG64 generator seeded with a 64-bit key obtained by folding
the master seed and a tuple of integer labels through the SplitMix64 finalizer:

    h_0 = mix64(master_seed)
    h_i = mix64(h_{i-1} XOR label_i)

so ``stream(seed, TREE, 3)`` is the level-3 stream of a tree and does not
depend on how many other levels or replicas were drawn before it.
"""

from __future__ import annotations

import numpy as np

MASK64 = 0xFFFFFFFFFFFFFFFF

# Stream domains.
TREE = 1
BALLS = 2
ENVIRONMENT = 3
REPLICA = 4


def mix64(value: int) -> int:
    """SplitMix64 finalizer: a bijective avalanche mix of a 64-bit integer."""
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master_seed: int, *labels: int) -> int:
    """Fold labels into the master seed.

    Args:
        master_seed: Unsigned 64-bit master seed (larger values are masked).
        *labels: Nonnegative integer labels such as (domain, level, index).

    Returns:
        A 64-bit derived seed.
    """
    h = mix64(master_seed & MASK64)
    for label in labels:
        h = mix64(h ^ (label & MASK64))
    return h


def stream(master_seed: int, *labels: int) -> np.random.Generator:
    """Return the generator identified by ``(master_seed, *labels)``."""
    return np.random.Generator(np.random.PCG64(derive_seed(master_seed, *labels)))
