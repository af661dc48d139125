"""Seeded randomness for instance generation.

Every random draw goes through numpy's Philox4x64-10 bit generator, a
counter-based generator keyed directly by the user seed.  Streams are split
by mixing a stream tag into the key, so each instance of a family has its own
independent, order-independent stream.
"""
from __future__ import annotations

import numpy as np

_MASK64 = (1 << 64) - 1


def make_rng(seed: int, stream: int = 0) -> np.random.Generator:
    if seed < 0 or stream < 0:
        raise ValueError("seed and stream must be non-negative")
    key = [seed & _MASK64, stream & _MASK64]
    return np.random.Generator(np.random.Philox(key=key))
