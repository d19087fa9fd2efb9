"""Colexicographic ranking of strictly increasing index tuples.

A tuple ``i_1 < ... < i_k`` has rank ``sum_j C(i_j, j)`` (1-based ``j``).
Tuples whose largest element is ``c`` occupy the contiguous rank block
``[C(c, k), C(c + 1, k))`` and, inside that block, the remaining
``(k - 1)``-prefix appears in its own colex order. Everything in this
package that walks a coefficient table relies on that block structure.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb

import numpy as np


def rank(tup) -> int:
    """Colex rank of a strictly increasing tuple of 0-based indices."""
    r = 0
    prev = -1
    for j, i in enumerate(tup, start=1):
        if i <= prev:
            raise ValueError(f"indices must be strictly increasing: {tuple(tup)}")
        r += comb(i, j)
        prev = i
    return r


def unrank(r: int, k: int) -> tuple[int, ...]:
    """Inverse of :func:`rank` for ``k``-tuples."""
    if r < 0:
        raise ValueError("rank must be non-negative")
    out = []
    for j in range(k, 0, -1):
        # largest c with C(c, j) <= r
        c = j - 1
        while comb(c + 1, j) <= r:
            c += 1
        out.append(c)
        r -= comb(c, j)
    return tuple(reversed(out))


def block_bounds(n: int, k: int) -> np.ndarray:
    """``C(c, k)`` for ``c = 0..n``; block ``c`` is ``[b[c], b[c+1])``."""
    return np.array([comb(c, k) for c in range(n + 1)], dtype=np.int64)


@lru_cache(maxsize=64)
def index_table(n: int, k: int) -> np.ndarray:
    """All ``k``-subsets of ``range(n)`` as rows, in colex order.

    Returned read-only; shape ``(C(n, k), k)``.
    """
    dtype = np.uint8 if n <= 256 else np.uint16
    if k == 0:
        out = np.zeros((1, 0), dtype=dtype)
    else:
        prev = index_table(n, k - 1)
        blocks = []
        for c in range(k - 1, n):
            head = prev[: comb(c, k - 1)]
            col = np.full((head.shape[0], 1), c, dtype=dtype)
            blocks.append(np.hstack([head, col]))
        out = np.vstack(blocks) if blocks else np.zeros((0, k), dtype=dtype)
    out.setflags(write=False)
    return out
