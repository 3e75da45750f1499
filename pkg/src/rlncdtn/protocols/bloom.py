"""Counting Bloom filter used as a buffer summary during Delta contacts."""
from __future__ import annotations

import hashlib
import math
from typing import Hashable


class CountingBloomFilter:
    """m small counters, h hash functions; supports removal."""

    def __init__(self, m: int, h: int = 3, hash_seed: int = 0):
        if m < 1 or h < 1:
            raise ValueError("m and h must be positive")
        self.m = m
        self.h = h
        self.hash_seed = hash_seed
        self.counters = [0] * m
        self.n_items = 0

    def _indexes(self, key: Hashable) -> list[int]:
        digest = hashlib.blake2b(repr(key).encode(), digest_size=16,
                                 salt=self.hash_seed.to_bytes(16, "little")).digest()
        h1 = int.from_bytes(digest[:8], "little")
        h2 = int.from_bytes(digest[8:], "little") | 1
        return [(h1 + i * h2) % self.m for i in range(self.h)]

    def add(self, key: Hashable) -> None:
        for i in self._indexes(key):
            self.counters[i] += 1
        self.n_items += 1

    def remove(self, key: Hashable) -> None:
        idx = self._indexes(key)
        if any(self.counters[i] == 0 for i in idx):
            raise KeyError(f"{key!r} was never added")
        for i in idx:
            self.counters[i] -= 1
        self.n_items -= 1

    def __contains__(self, key: Hashable) -> bool:
        return all(self.counters[i] > 0 for i in self._indexes(key))

    def clear(self) -> None:
        self.counters = [0] * self.m
        self.n_items = 0

    def false_positive_rate(self, n_items: int | None = None) -> float:
        """(1 - exp(-h*s/m))^h for s stored items."""
        s = self.n_items if n_items is None else n_items
        return (1.0 - math.exp(-self.h * s / self.m)) ** self.h
