"""Reproducible random streams.

Every chain draws from a Philox counter-based generator keyed by
``(master seed, stream id)``, so replicate ``i`` of a study sees the same
numbers whatever order or process the replicates run in.
"""
from __future__ import annotations

import numpy as np

__all__ = ["RNG_ALGORITHM", "make_rng", "derive_seed"]

RNG_ALGORITHM = "numpy.random.Philox keyed by SeedSequence(seed, spawn_key=(stream,))"

_MASK64 = (1 << 64) - 1


def _seed_sequence(seed: int, stream: int | tuple = ()) -> np.random.SeedSequence:
    if isinstance(stream, int):
        stream = (stream,)
    return np.random.SeedSequence(int(seed) & _MASK64, spawn_key=tuple(int(s) for s in stream))


def make_rng(seed: int, stream: int | tuple = ()) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(_seed_sequence(seed, stream)))


def derive_seed(seed: int, stream: int | tuple) -> int:
    """A 64-bit seed for sub-stream ``stream`` of ``seed``."""
    return int(_seed_sequence(seed, stream).generate_state(1, dtype=np.uint64)[0])
