"""Deterministic, splittable random-number streams.

Every stochastic routine in the package receives an :class:`RngStream`
rather than a bare generator.  A stream is identified by a 64-bit master
seed plus a key tuple (typically ``(scenario id, replicate index)``), and
equal (seed, key) pairs reproduce the same draws no matter when, where or
in which order the work is scheduled.  Sub-tasks derive their own streams
with :meth:`RngStream.child`, which is what makes serial and parallel
execution bit-identical.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_WORD = 2**32


def _key_word(part) -> int:
    """Map one key part to a 32-bit word for SeedSequence spawn keys."""
    if isinstance(part, (bool, float)):
        raise TypeError(f"stream key parts must be int or str, got {part!r}")
    if isinstance(part, (int, np.integer)):
        if not 0 <= int(part) < _WORD:
            raise ValueError(f"integer key parts must be in [0, 2^32), got {part}")
        return int(part)
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:4], "big")
    raise TypeError(f"stream key parts must be int or str, got {type(part).__name__}")


@dataclass(frozen=True)
class RngStream:
    """A named substream of a master seed.

    Attributes:
        seed: the study-level master seed.
        key: tuple of ints/strings naming the substream, e.g.
            ``("table1", 17)`` for replicate 17 of a scenario.
    """

    seed: int
    key: tuple = ()

    def child(self, *parts) -> "RngStream":
        """Derive a substream by appending key parts."""
        return RngStream(self.seed, self.key + tuple(parts))

    def generator(self) -> np.random.Generator:
        """Fresh generator for this stream; repeated calls restart the draws."""
        words = tuple(_key_word(p) for p in self.key)
        return np.random.default_rng(
            np.random.SeedSequence(entropy=self.seed, spawn_key=words)
        )
