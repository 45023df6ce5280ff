"""SplitMix64 random stream.

Output i of a generator seeded with ``seed`` is ``mix(seed + (i + 1) * G)``
with G = 0x9E3779B97F4A7C15 and the standard SplitMix64 finalizer, all modulo
2^64.  Being counter based, blocks of outputs are computed vectorized and the
stream is identical on every platform.
"""

import numpy as np

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_MASK = (1 << 64) - 1


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


class SplitMix64:
    def __init__(self, seed=0):
        self.seed = int(seed) & _MASK
        self.counter = 0

    def next_u64(self, n):
        i = np.arange(self.counter + 1, self.counter + 1 + n, dtype=np.uint64)
        self.counter += n
        with np.errstate(over="ignore"):
            return _mix(np.uint64(self.seed) + i * GOLDEN)

    def uniform(self, n):
        """Doubles in [0, 1) from the top 53 bits."""
        return (self.next_u64(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n):
        """Standard normals by Box-Muller (one pair of uniforms per value)."""
        u = self.uniform(2 * n).reshape(n, 2)
        r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
        return r * np.cos(2.0 * np.pi * u[:, 1])

    def phases(self, n):
        """Unit complex numbers exp(2 pi i u)."""
        return np.exp(2j * np.pi * self.uniform(n))
