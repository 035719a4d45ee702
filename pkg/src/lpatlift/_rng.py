"""Seeded random streams.

Every sampler in the package only needs ``rng.random()``; anything with that
method works (``random.Random``, ``numpy.random.Generator``, :class:`Stream`).
:class:`Stream` is the one used by the experiment harness: a Philox generator
keyed by ``(seed, chunk)`` through ``numpy.random.SeedSequence`` with uniforms
drawn in blocks, which keeps per-draw overhead low in pure-Python loops.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

import numpy as np

ALGORITHM = "numpy-Philox4x64/SeedSequence(seed,spawn_key=(chunk,))/float64-uniform-buffer"
CHUNK_SIZE = 1024
_BUFFER = 2048


class Stream:
    def __init__(self, seed: int, key: tuple[int, ...] = ()):
        ss = np.random.SeedSequence(seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.Philox(ss))
        self._buf: list[float] = []
        self._pos = 0

    def random(self) -> float:
        if self._pos >= len(self._buf):
            self._buf = self.generator.random(_BUFFER).tolist()
            self._pos = 0
        u = self._buf[self._pos]
        self._pos += 1
        return u


def randbelow(rng, k: int) -> int:
    """Uniform integer in [0, k)."""
    return min(int(rng.random() * k), k - 1)


def exponential(rng, rate: float) -> float:
    return -math.log(1.0 - rng.random()) / rate


def beta(rng, a: float, b: float) -> float:
    if isinstance(rng, Stream):
        return float(rng.generator.beta(a, b))
    if isinstance(rng, np.random.Generator):
        return float(rng.beta(a, b))
    return rng.betavariate(a, b)


def as_rng(rng):
    """Accept a seed, ``None`` or an existing generator."""
    if rng is None:
        return random.Random()
    if isinstance(rng, (int, np.integer)):
        return Stream(int(rng))
    return rng


@dataclass(frozen=True)
class RngSpec:
    """How a master seed is turned into per-replicate randomness.

    Replicate ``r`` is simulated on stream ``(seed, r // chunk_size)``, after
    the replicates of the same chunk with smaller index, so the chunking (and
    not the worker count) fixes every draw.
    """

    seed: int
    chunk_size: int = CHUNK_SIZE
    algorithm: str = ALGORITHM

    def stream(self, chunk: int) -> Stream:
        return Stream(self.seed, (chunk,))

    def chunks(self, replicates: int) -> list[tuple[int, int, int]]:
        """``(chunk, first, stop)`` triples covering ``range(replicates)``."""
        return [
            (c, lo, min(lo + self.chunk_size, replicates))
            for c, lo in enumerate(range(0, replicates, self.chunk_size))
        ]

    def as_dict(self) -> dict:
        return {"algorithm": self.algorithm, "seed": self.seed, "chunk_size": self.chunk_size}
