"""Seeded randomness with stable, independently derivable substreams."""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


class SeededRng:
    """Deterministic random source: identical seed, identical stream.

    Wraps numpy's PCG64. Independent pipeline stages get their own stream
    via :meth:`child`, which derives the child seed by hashing (seed, tag),
    so adding a consumer never shifts the draws of an existing one.
    """

    def __init__(self, seed: int):
        self.seed = int(seed) & _MASK64
        self._gen = np.random.Generator(np.random.PCG64(self.seed))

    def child(self, tag: str) -> "SeededRng":
        """Derive an independent stream keyed by ``tag``."""
        digest = hashlib.sha256(f"{self.seed}/{tag}".encode()).digest()
        return SeededRng(int.from_bytes(digest[:8], "little"))

    def random(self, size=None) -> np.ndarray:
        return self._gen.random(size)

    def uniform(self, low: float, high: float, size=None) -> np.ndarray:
        return self._gen.uniform(low, high, size)

    def normal(self, loc: float = 0.0, scale: float = 1.0, size=None) -> np.ndarray:
        return self._gen.normal(loc, scale, size)

    def integers(self, low: int, high: int) -> int:
        return int(self._gen.integers(low, high))

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def choice(self, n: int, p=None) -> int:
        return int(self._gen.choice(n, p=p))
