"""Pure-Python / numpy reference implementations of the hot kernels.

The compiled module in ``_native.pyx`` must produce bit-identical results;
the test suite and ``benchmarks/bench_kernels.py`` compare both backends.
"""

import numpy as np


def topk_indices(scores: np.ndarray, k: int) -> np.ndarray:
    """Indices of the ``k`` largest scores.

    Ordered by (score descending, index ascending); ties on score are
    broken by the smaller index. Returns all indices when ``k`` exceeds
    the array length.
    """
    n = scores.shape[0]
    k = min(k, n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    order = np.lexsort((np.arange(n), -scores.astype(np.float64, copy=False)))
    return order[:k].astype(np.int64)


def wordpiece_pieces(word: str, vocab: dict | set, prefix: str) -> list[str] | None:
    """Greedy longest-match-first subword split of a single word.

    Non-initial pieces carry ``prefix``. Returns None when no complete
    decomposition exists.
    """
    n = len(word)
    pieces: list[str] = []
    start = 0
    while start < n:
        end = n
        found = None
        while start < end:
            sub = word[start:end]
            if start > 0:
                sub = prefix + sub
            if sub in vocab:
                found = sub
                break
            end -= 1
        if found is None:
            return None
        pieces.append(found)
        start = end
    return pieces
