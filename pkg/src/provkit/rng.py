"""Portable 64-bit PRNG primitives (splitmix64).

splitmix64 is counter-based: output i depends only on seed + GOLDEN*(i+1),
so a stream can be generated sequentially or as a vectorized batch with
bit-identical results. Everything here is pure integer arithmetic mod 2^64.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def splitmix64(state: int) -> int:
    """First output of a splitmix64 stream seeded with ``state``."""
    z = (state + GOLDEN) & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream."""

    __slots__ = ("state",)

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        z = self.state
        z = ((z ^ (z >> 30)) * _MIX1) & MASK64
        z = ((z ^ (z >> 27)) * _MIX2) & MASK64
        return z ^ (z >> 31)


def splitmix64_outputs(seed: int, count: int) -> np.ndarray:
    """Outputs 1..count of a splitmix64 stream, as a uint64 array.

    Identical to calling SplitMix64(seed).next() ``count`` times.
    """
    if count == 0:
        return np.empty(0, dtype=np.uint64)
    idx = np.arange(1, count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        z = np.uint64(seed & MASK64) + np.uint64(GOLDEN) * idx
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def splitmix64_hash(values: np.ndarray, key: int) -> np.ndarray:
    """Vectorized splitmix64(v XOR key) over a uint64 array."""
    with np.errstate(over="ignore"):
        z = (values ^ np.uint64(key)) + np.uint64(GOLDEN)
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        return z ^ (z >> np.uint64(31))


def mix_epoch_seed(seed: int, epoch: int) -> int:
    """Per-epoch shuffle seed: splitmix64(seed XOR (GOLDEN * (epoch+1)))."""
    return splitmix64((seed ^ ((GOLDEN * (epoch + 1)) & MASK64)) & MASK64)
