"""Pure-numpy top-k selection, the fallback for the compiled kernel.

Full lexicographic sort: primary key score descending, secondary key
tie_rank ascending. Must stay output-identical to the compiled heap.
"""

import numpy as np


def topk_indices(scores, tie_rank, k: int):
    """Indices of the k best entries, best first."""
    scores = np.asarray(scores)
    tie_rank = np.asarray(tie_rank)
    if scores.ndim != 1 or tie_rank.shape != scores.shape:
        raise ValueError("scores and tie_rank length mismatch")
    if k <= 0:
        raise ValueError("k must be positive")
    k = min(int(k), scores.shape[0])
    order = np.lexsort((tie_rank, -scores))
    return order[:k].astype(np.int64)
