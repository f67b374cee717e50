"""Seeded, bit-portable randomness based on the splitmix64 generator.

All stochastic pieces of the engine (toy encoder projections, synthetic
data, test instance generation) draw from this single source so that
golden values are reproducible across platforms and numpy versions.
"""

from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# 2**-53; maps the top 53 bits of a u64 to [0, 1)
_U53 = 1.0 / (1 << 53)


def _mix(z: int) -> int:
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK64
    return z ^ (z >> 31)


class SplitMix64:
    """Sequential splitmix64 stream.

    The n-th output is mix(seed + n * gamma), so arbitrary subsequences
    can also be generated in bulk without stepping (see `bulk_u64`).
    """

    def __init__(self, seed: int):
        self._seed = seed & _MASK64
        self._count = 0

    def next_u64(self) -> int:
        self._count += 1
        return _mix((self._seed + self._count * _GAMMA) & _MASK64)

    def next_float(self) -> float:
        """Uniform double in [0, 1)."""
        return (self.next_u64() >> 11) * _U53

    def floats(self, n: int) -> np.ndarray:
        """n uniform doubles in [0, 1), advancing the stream by n."""
        out = bulk_floats(self._seed, self._count, n)
        self._count += n
        return out

    def uniform_signed(self, n: int) -> np.ndarray:
        """n uniform doubles in [-1, 1)."""
        return 2.0 * self.floats(n) - 1.0

    def randint(self, upper: int) -> int:
        """Integer in [0, upper) by modular reduction (fine for toy scale)."""
        return self.next_u64() % upper

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randint(i + 1)
            items[i], items[j] = items[j], items[i]


def bulk_u64(seed: int, start: int, count: int) -> np.ndarray:
    """Outputs start+1 .. start+count of the stream, vectorized."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    z = (np.uint64(seed & _MASK64) + idx * np.uint64(_GAMMA))
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def bulk_floats(seed: int, start: int, count: int) -> np.ndarray:
    return (bulk_u64(seed, start, count) >> np.uint64(11)).astype(np.float64) * _U53
