"""Seeded pseudo-random state with reproducible child-stream derivation.

Everything that draws randomness takes an explicit RngState; there is no
hidden global generator. The same seed always yields the same stream,
bit for bit.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step; a cheap, well-dispersed 64-bit mixer."""
    x = (x + _GOLDEN) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


class RngState:
    """A seeded PCG64 stream wrapped with the seed kept around for audit."""

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def uniform(self, size=None):
        return self._gen.uniform(0.0, 1.0, size=size)

    def normal(self, size=None):
        return self._gen.standard_normal(size=size)

    def integers(self, low: int, high: int, size=None):
        return self._gen.integers(low, high, size=size)

    def derive(self, index: int) -> "RngState":
        """Deterministic child state for stream `index`, independent of draw order."""
        child_seed = splitmix64((self.seed + (index + 1) * _GOLDEN) & _MASK64)
        return RngState(child_seed)

    def __repr__(self):
        return f"RngState(seed={self.seed})"
