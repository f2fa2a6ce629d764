# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: exact top-k selection and WordPiece matching.

Must stay bit-identical to ``xlingqa._kernels.pure``; the benchmark and
the kernel tests compare both backends on the same inputs.
"""

import numpy as np


cdef inline bint _worse(float sa, long long ia, float sb, long long ib) noexcept:
    # "worse" = loses under (score desc, index asc)
    if sa != sb:
        return sa < sb
    return ia > ib


cdef void _sift_down(float[::1] hs, long long[::1] hi, Py_ssize_t size, Py_ssize_t pos) noexcept:
    cdef Py_ssize_t child
    cdef float s = hs[pos]
    cdef long long i = hi[pos]
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        if child + 1 < size and _worse(hs[child + 1], hi[child + 1], hs[child], hi[child]):
            child += 1
        if _worse(hs[child], hi[child], s, i):
            hs[pos] = hs[child]
            hi[pos] = hi[child]
            pos = child
        else:
            break
    hs[pos] = s
    hi[pos] = i


def topk_indices(scores_arr, k):
    """Indices of the k largest scores by (score desc, index asc)."""
    cdef const float[::1] scores = scores_arr
    cdef Py_ssize_t n = scores.shape[0]
    cdef Py_ssize_t kk = k if k < n else n
    if kk <= 0:
        return np.empty(0, dtype=np.int64)
    hs_arr = np.empty(kk, dtype=np.float32)
    hi_arr = np.empty(kk, dtype=np.int64)
    cdef float[::1] hs = hs_arr
    cdef long long[::1] hi = hi_arr
    cdef Py_ssize_t i, pos
    # min-heap over the kept set; the root is the weakest element
    for i in range(kk):
        hs[i] = scores[i]
        hi[i] = i
    for pos in range(kk // 2 - 1, -1, -1):
        _sift_down(hs, hi, kk, pos)
    for i in range(kk, n):
        if _worse(hs[0], hi[0], scores[i], i):
            hs[0] = scores[i]
            hi[0] = i
            _sift_down(hs, hi, kk, 0)
    order = np.lexsort((hi_arr, -hs_arr.astype(np.float64)))
    return hi_arr[order]


def wordpiece_pieces(str word, vocab, str prefix):
    """Greedy longest-match-first split; None when no decomposition exists."""
    cdef Py_ssize_t n = len(word)
    cdef Py_ssize_t start = 0, end
    cdef list pieces = []
    cdef str sub
    while start < n:
        end = n
        sub = None
        while start < end:
            if start > 0:
                sub = prefix + word[start:end]
            else:
                sub = word[start:end]
            if sub in vocab:
                break
            sub = None
            end -= 1
        if sub is None:
            return None
        pieces.append(sub)
        start = end
    return pieces
