"""Deterministic 64-bit generator used for sampling, fixtures, and graph synthesis.

SplitMix64 is a counter-based mixer: output ``i`` depends only on
``seed + (i + 1) * GAMMA``, so a sequential stream and a vectorized batch
produce identical values. That property keeps fixture generation fast in
numpy while node sampling stays a plain Python loop, both reproducible
across platforms and languages.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15

_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """Finalizing mixer of SplitMix64 on a 64-bit state."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _M1) & MASK64
    z = ((z ^ (z >> 27)) * _M2) & MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential SplitMix64 stream."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GAMMA) & MASK64
        return mix64(self._state)

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound). Modulo bias is negligible for
        bound << 2**64 and keeps the mapping trivially portable."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return self.next_u64() % bound

    def next_unit(self) -> float:
        """Float64 in [0, 1) using the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53


def u64_block(seed: int, start: int, count: int) -> np.ndarray:
    """Vectorized outputs ``start .. start+count-1`` of the stream for ``seed``.

    Bitwise identical to calling :meth:`SplitMix64.next_u64` that many times.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = np.uint64(seed) + idx * np.uint64(GAMMA)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def uniform_block(seed: int, start: int, count: int, low: float, high: float) -> np.ndarray:
    """Vectorized float64 uniforms in [low, high) from the same stream."""
    u = (u64_block(seed, start, count) >> np.uint64(11)).astype(np.float64) * 2.0**-53
    return low + u * (high - low)
