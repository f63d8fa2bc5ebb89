"""Seeded random streams.

Every sampler takes either a ``numpy.random.Generator`` or a seed. Seeds are
turned into counter-based Philox generators so that independent streams can
be split off deterministically with :func:`spawn`.
"""

import numpy as np


def as_generator(seed=None) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    if isinstance(seed, np.random.SeedSequence):
        return np.random.Generator(np.random.Philox(seed))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))


def spawn(rng, k: int) -> list:
    """``k`` independent child generators of ``rng``."""
    return as_generator(rng).spawn(k)


class UniformStream:
    """Buffered scalar uniforms in [0, 1); scalar Generator calls are slow."""

    __slots__ = ("_rng", "_buf", "_pos", "_block")

    def __init__(self, rng, block: int = 4096):
        self._rng = rng
        self._block = block
        self._buf = []
        self._pos = 0

    def next(self) -> float:
        if self._pos == len(self._buf):
            self._buf = self._rng.random(self._block).tolist()
            self._pos = 0
        x = self._buf[self._pos]
        self._pos += 1
        return x
