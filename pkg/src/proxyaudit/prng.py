"""SplitMix64 counter-based generator.

Every draw is a pure function of ``(seed, key, index)``::

    stream = mix64(seed XOR key_hash(key))
    z_i    = mix64(stream + (i + 1) * GOLDEN)          for i = 0, 1, ...
    u_i    = (z_i >> 11) * 2**-53                      uniform on [0, 1)

where ``mix64`` is the SplitMix64 finalizer and ``key_hash`` takes the first
eight bytes (big-endian) of SHA-256 of the UTF-8 key. Keys give each column its
own substream, so adding a column never shifts the values of another.
"""

from __future__ import annotations

import hashlib

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK64 = (1 << 64) - 1

_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def mix64(z: int) -> int:
    """SplitMix64 finalizer on a Python int."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def key_hash(key: str) -> int:
    return int.from_bytes(hashlib.sha256(key.encode("utf-8")).digest()[:8], "big")


class SplitMix64:
    """Sequential SplitMix64, the reference form of the generator."""

    def __init__(self, seed: int):
        self.state = seed & MASK64

    def next_u64(self) -> int:
        self.state = (self.state + GOLDEN) & MASK64
        return mix64(self.state)

    def next_float(self) -> float:
        return (self.next_u64() >> 11) * 2.0**-53


class Stream:
    """A keyed substream that produces whole vectors of draws at once."""

    def __init__(self, seed: int, key: str):
        self.seed = seed & MASK64
        self.key = key
        self.origin = mix64(self.seed ^ key_hash(key))

    def u64(self, n: int, offset: int = 0) -> np.ndarray:
        idx = np.arange(offset + 1, offset + n + 1, dtype=np.uint64)
        with np.errstate(over="ignore"):
            state = np.uint64(self.origin) + idx * np.uint64(GOLDEN)
            return _mix64_array(state)

    def uniform(self, n: int, offset: int = 0) -> np.ndarray:
        return (self.u64(n, offset) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normal(self, n: int) -> np.ndarray:
        # Box-Muller on interleaved pairs; 1 - u keeps the log argument in (0, 1].
        u = self.uniform(2 * n)
        u1, u2 = 1.0 - u[0::2], u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def bernoulli(self, p, n: int) -> np.ndarray:
        return (self.uniform(n) < np.asarray(p, dtype=float)).astype(np.int64)

    def choice(self, probs, n: int) -> np.ndarray:
        """Indices drawn by inverse CDF from ``probs`` (rows may vary per draw)."""
        probs = np.asarray(probs, dtype=float)
        u = self.uniform(n)
        if probs.ndim == 1:
            cdf = np.cumsum(probs / probs.sum())
            return np.minimum(np.searchsorted(cdf, u, side="right"), len(probs) - 1)
        cdf = np.cumsum(probs / probs.sum(axis=1, keepdims=True), axis=1)
        return np.minimum((u[:, None] >= cdf).sum(axis=1), probs.shape[1] - 1)

    def permutation(self, n: int) -> np.ndarray:
        return np.argsort(self.u64(n), kind="stable")
