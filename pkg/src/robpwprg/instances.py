"""Random program families.

* permutation: every (layer, symbol) acts as an independent uniform permutation;
* regular: each layer is the union of 2^s uniform perfect matchings, and every
  vertex then shuffles its out-labels;
* general: independent uniform transitions.

Start is 0; the accept set is drawn per instance unless fixed by the caller.
"""
from __future__ import annotations

import numpy as np

from . import robp as rb

CLASSES = ("permutation", "regular", "general")


def random_trans(rng: np.random.Generator, cls: str, n: int, w: int, s: int) -> np.ndarray:
    d = 1 << s
    t = np.empty((n, w, d), dtype=np.int64)
    for i in range(n):
        if cls == "permutation":
            for x in range(d):
                t[i, :, x] = rng.permutation(w)
        elif cls == "regular":
            layer = np.stack([rng.permutation(w) for _ in range(d)], axis=1)
            for u in range(w):
                layer[u] = layer[u, rng.permutation(d)]
            t[i] = layer
        elif cls == "general":
            t[i] = rng.integers(0, w, size=(w, d))
        else:
            raise ValueError(f"unknown class {cls!r}")
    return t


def random_robp(rng: np.random.Generator, cls: str, n: int, w: int, s: int,
                accept: str | tuple = "random") -> rb.Robp:
    """``accept`` is "random" (nonempty proper subset when w > 1), "single" or an explicit tuple."""
    if n < 1 or w < 1 or s < 0:
        raise ValueError("invalid shape")
    t = random_trans(rng, cls, n, w, s)
    if accept == "random":
        size = int(rng.integers(1, w)) if w > 1 else 1
        acc = tuple(sorted(int(a) for a in rng.choice(w, size=size, replace=False)))
    elif accept == "single":
        acc = (int(rng.integers(0, w)),)
    else:
        acc = tuple(accept)
    return rb.Robp(t, s, 0, acc)


def random_family(rng: np.random.Generator, cls: str, n: int, w: int, s: int, count: int,
                  accept: str | tuple = "random") -> list[rb.Robp]:
    return [random_robp(rng, cls, n, w, s, accept) for _ in range(count)]
