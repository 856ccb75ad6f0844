"""Counter-based deterministic random numbers.

Every draw is a pure function of (seed, stream, counter), so generated
scenario files and training runs are bit-reproducible across processes,
platforms, and independent implementations of the same construction.
The exact construction (a splitmix64 finalizer over a Weyl-advanced
counter) is documented in docs/FORMAT.md; do not change any constant
here without updating that document and the golden tests.
"""

from __future__ import annotations

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)

# Fixed stream identifiers.  Streams keep independent draws (labels vs.
# noise vs. shuffling) from aliasing when code is reordered.
STREAM_LABELS = 1
STREAM_PROBS = 2
STREAM_EMBED = 3
STREAM_KNOWLEDGE = 4
STREAM_INIT = 5
STREAM_RESTARTS = 6
STREAM_SPLIT = 7
STREAM_SAMPLE = 8
# Per-epoch shuffle streams are SHUFFLE_BASE + epoch index.
STREAM_SHUFFLE_BASE = 0x1000


def _finalize(x: np.ndarray) -> np.ndarray:
    """splitmix64 output finalizer, vectorized over uint64 arrays."""
    with np.errstate(over="ignore"):
        x = x.astype(np.uint64, copy=True)
        x ^= x >> np.uint64(30)
        x *= _MIX1
        x ^= x >> np.uint64(27)
        x *= _MIX2
        x ^= x >> np.uint64(31)
    return x


def _key(seed: int, stream: int) -> np.uint64:
    with np.errstate(over="ignore"):
        s = np.uint64(seed & 0xFFFFFFFFFFFFFFFF)
        t = np.uint64((stream + 1) & 0xFFFFFFFFFFFFFFFF)
        return _finalize(np.array([s + _GAMMA * t], dtype=np.uint64))[0]


class CounterRng:
    """Stateless-by-construction generator: draw i is finalize(key + (i+1)*GAMMA)."""

    def __init__(self, seed: int, stream: int = 0):
        self.seed = seed
        self.stream = stream
        self._key = _key(seed, stream)
        self._counter = 0

    def u64(self, n: int) -> np.ndarray:
        idx = np.arange(self._counter + 1, self._counter + n + 1, dtype=np.uint64)
        self._counter += n
        with np.errstate(over="ignore"):
            return _finalize(self._key + _GAMMA * idx)

    def uniforms(self, shape) -> np.ndarray:
        """Doubles in [0, 1), from the top 53 bits of each word."""
        n = int(np.prod(shape, dtype=np.int64)) if not np.isscalar(shape) else int(shape)
        u = (self.u64(n) >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        return u.reshape(shape)

    def normals(self, shape) -> np.ndarray:
        """Standard normals via Box-Muller; each pair consumes two words."""
        n = int(np.prod(shape, dtype=np.int64)) if not np.isscalar(shape) else int(shape)
        pairs = (n + 1) // 2
        w = self.u64(2 * pairs)
        # u1 in (0, 1] so the log is finite; u2 in [0, 1).
        u1 = ((w[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * (2.0 ** -53)
        u2 = (w[1::2] >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
        r = np.sqrt(-2.0 * np.log(u1))
        theta = 2.0 * np.pi * u2
        z = np.empty(2 * pairs)
        z[0::2] = r * np.cos(theta)
        z[1::2] = r * np.sin(theta)
        return z[:n].reshape(shape)

    def integers(self, upper: int, shape) -> np.ndarray:
        """Ints in [0, upper) as floor(u * upper); bias is O(2^-53), documented."""
        if upper <= 0:
            raise ValueError("upper must be positive")
        u = self.uniforms(shape)
        return np.minimum((u * upper).astype(np.int64), upper - 1)

    def permutation(self, n: int) -> np.ndarray:
        """Fisher-Yates over [0, n), one uniform per step, from the top down."""
        perm = np.arange(n)
        if n < 2:
            return perm
        u = self.uniforms(n - 1)
        for i in range(n - 1, 0, -1):
            j = min(int(u[n - 1 - i] * (i + 1)), i)
            perm[i], perm[j] = perm[j], perm[i]
        return perm

    def dirichlet_uniform(self, n: int) -> np.ndarray:
        """A point uniform on the simplex: normalized unit exponentials."""
        e = -np.log1p(-self.uniforms(n))
        total = e.sum()
        if total == 0.0:
            return np.full(n, 1.0 / n)
        return e / total
