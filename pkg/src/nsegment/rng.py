"""Seeded random streams with deterministic splitting.

Built on numpy's counter-based Philox generator. A stream is identified by
its seed plus a spawn path, so any (epoch, sample, stage) coordinate can be
turned into an independent substream without consuming draws from the
parent. Identical seed and identical draw sequence give bit-identical
output on every platform.
"""

from __future__ import annotations

import numpy as np

from .errors import InvalidParam

_MASK64 = (1 << 64) - 1


class RngStream:
    """Single-owner random stream; share work by splitting, never the stream."""

    __slots__ = ("_seq", "_gen")

    def __init__(self, seed: int | np.random.SeedSequence):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(int(seed) & _MASK64)
        self._gen = np.random.Generator(np.random.Philox(self._seq))

    def random(self) -> float:
        """One uniform draw in [0, 1)."""
        return float(self._gen.random())

    def rand(self, *shape: int) -> np.ndarray:
        """Uniform [0, 1) array of the given shape (float64)."""
        return self._gen.random(shape)

    def index(self, n: int) -> int:
        """Uniform integer in [0, n)."""
        if n <= 0:
            raise InvalidParam(f"index() needs n > 0, got {n}")
        return int(self._gen.integers(n))

    def randint(self, low: int, high: int, size=None):
        """Uniform integers in [low, high], both ends inclusive."""
        if high < low:
            raise InvalidParam(f"randint() needs low <= high, got [{low}, {high}]")
        value = self._gen.integers(low, high, size=size, endpoint=True)
        return value if size is not None else int(value)

    def split(self, *keys: int) -> "RngStream":
        """Independent child stream addressed by the given key path.

        Splitting depends only on the seed and key path, not on how many
        draws the parent has produced.
        """
        child = np.random.SeedSequence(
            entropy=self._seq.entropy,
            spawn_key=self._seq.spawn_key + tuple(int(k) for k in keys),
        )
        return RngStream(child)
