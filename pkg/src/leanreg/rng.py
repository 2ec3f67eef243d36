"""Keyed random streams.

A stream is identified by ``(seed, stream_id)``. The generator behind it is a
counter-based Philox keyed through ``numpy.random.SeedSequence``, so a stream
can be rebuilt anywhere (any thread, any order) and yields the same draws.
Child streams are derived by hashing a key path into a new 64-bit id.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

_MASK64 = (1 << 64) - 1


def stable_hash(*parts) -> int:
    """64-bit hash of a tuple of ints/floats/strings, stable across processes."""
    h = hashlib.blake2b(digest_size=8)
    for p in parts:
        if isinstance(p, np.integer):
            p = int(p)
        elif isinstance(p, np.floating):
            p = float(p)
        h.update(f"{type(p).__name__}:{p!r}\x00".encode())
    return int.from_bytes(h.digest(), "little")


@dataclass(frozen=True)
class RngStream:
    seed: int
    stream_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "seed", int(self.seed) & _MASK64)
        object.__setattr__(self, "stream_id", int(self.stream_id) & _MASK64)

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_id,))
        return np.random.Generator(np.random.Philox(ss))

    def child(self, *keys) -> RngStream:
        return RngStream(self.seed, stable_hash(self.stream_id, *keys))


def as_generator(rng) -> np.random.Generator:
    """Accept an ``RngStream``, a ``Generator``, an int seed or ``None``."""
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngStream):
        return rng.generator()
    if rng is None or isinstance(rng, (int, np.integer)):
        return RngStream(0 if rng is None else int(rng)).generator()
    raise TypeError(f"cannot build a generator from {type(rng).__name__}")
