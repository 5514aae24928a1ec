# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Heap-based exact top-k selection with deterministic tie handling.

Keeps a size-k heap whose root is the worst kept candidate, so a full pass
costs O(n log k) instead of the O(n log n) full sort the fallback uses.
Ordering: higher score first; equal scores fall back to the smaller
tie_rank. Output matches the pure-python backend exactly.
"""

import numpy as np

ctypedef fused floating:
    float
    double


cdef inline bint _worse(floating[::1] s, const long long[::1] t,
                        Py_ssize_t a, Py_ssize_t b) noexcept:
    # True when entry a ranks strictly below entry b.
    if s[a] < s[b]:
        return True
    if s[a] > s[b]:
        return False
    return t[a] > t[b]


cdef inline void _siftdown(floating[::1] s, const long long[::1] t,
                           Py_ssize_t[::1] heap, Py_ssize_t size) noexcept:
    cdef Py_ssize_t pos = 0
    cdef Py_ssize_t child, right, tmp
    while True:
        child = 2 * pos + 1
        if child >= size:
            break
        right = child + 1
        if right < size and _worse(s, t, heap[right], heap[child]):
            child = right
        if _worse(s, t, heap[child], heap[pos]):
            tmp = heap[child]
            heap[child] = heap[pos]
            heap[pos] = tmp
            pos = child
        else:
            break


def topk_indices(floating[::1] scores, const long long[::1] tie_rank, Py_ssize_t k):
    """Indices of the k best entries, best first."""
    cdef Py_ssize_t n = scores.shape[0]
    if tie_rank.shape[0] != n:
        raise ValueError("scores and tie_rank length mismatch")
    if k <= 0:
        raise ValueError("k must be positive")
    if k > n:
        k = n

    heap_arr = np.empty(k, dtype=np.intp)
    out = np.empty(k, dtype=np.int64)
    cdef Py_ssize_t[::1] heap = heap_arr
    cdef long long[::1] out_view = out

    cdef Py_ssize_t size = 0
    cdef Py_ssize_t i, pos, parent, tmp
    for i in range(n):
        if size < k:
            pos = size
            heap[pos] = i
            size += 1
            while pos > 0:
                parent = (pos - 1) >> 1
                if _worse(scores, tie_rank, heap[pos], heap[parent]):
                    tmp = heap[pos]
                    heap[pos] = heap[parent]
                    heap[parent] = tmp
                    pos = parent
                else:
                    break
        elif _worse(scores, tie_rank, heap[0], i):
            heap[0] = i
            _siftdown(scores, tie_rank, heap, size)

    # Pop worst-first into the tail so the result reads best-first.
    for i in range(k - 1, -1, -1):
        out_view[i] = heap[0]
        size -= 1
        heap[0] = heap[size]
        _siftdown(scores, tie_rank, heap, size)
    return out
