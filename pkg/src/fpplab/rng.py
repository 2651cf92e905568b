"""Deterministic RNG streams.

A master 64-bit seed is expanded into per-replica streams with a
splitmix64-style derivation, so any replica's stream depends only on
(master seed, replica index) and aggregation order never matters.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step for the 64-bit state ``x``."""
    x = (x + _GOLDEN) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def replica_seed(master: int, index: int) -> int:
    """Seed for replica ``index`` derived from ``master``."""
    return splitmix64((master & _MASK) ^ splitmix64(index & _MASK))


def seed_schedule(master: int, count: int) -> list[int]:
    return [replica_seed(master, i) for i in range(count)]


def generator(seed: int) -> np.random.Generator:
    """A PCG64 generator for one stream."""
    return np.random.Generator(np.random.PCG64(seed))
