"""Exact brute-force scoring and top-k retrieval.

Scores are computed in float64 regardless of the stored float32 embeddings
so that both top-k backends and any thread schedule see identical numbers.
Ties on score are broken by lexicographic doc id, ascending; this matches
the deterministic ordering contract used everywhere else in the package.
"""

from __future__ import annotations

from typing import Callable, Mapping, Sequence

import numpy as np

from drselect import kernels
from drselect.corpusio import SIMILARITIES, EmbeddingMatrix, RankedList
from drselect.errors import DataValidationError
from drselect.seeding import derive_rng


def similarity(q, d, kind: str) -> float:
    """Scalar dot or cosine similarity of two vectors."""
    q = np.asarray(q, dtype=np.float64)
    d = np.asarray(d, dtype=np.float64)
    if q.ndim != 1 or d.ndim != 1:
        raise DataValidationError("similarity expects 1-D vectors")
    if q.shape[0] != d.shape[0]:
        raise DataValidationError(
            f"dimension mismatch: {q.shape[0]} vs {d.shape[0]}"
        )
    if kind == "dot":
        return float(q @ d)
    if kind == "cosine":
        qn = float(np.linalg.norm(q))
        dn = float(np.linalg.norm(d))
        if qn == 0.0 or dn == 0.0:
            raise DataValidationError("zero vector under cosine similarity")
        return float(q @ d) / (qn * dn)
    raise DataValidationError(f"unknown similarity kind {kind!r}")


def score_corpus(query_vec, docs: EmbeddingMatrix, kind: str) -> np.ndarray:
    """Similarity of one query vector against every document row (float64)."""
    q = np.asarray(query_vec, dtype=np.float64)
    if q.ndim != 1 or q.shape[0] != docs.dim:
        raise DataValidationError(
            f"query dimension {q.shape} does not match docs dim {docs.dim}"
        )
    scores = docs.rows64() @ q
    if kind == "dot":
        return scores
    if kind == "cosine":
        qn = float(np.linalg.norm(q))
        norms = docs.norms64()
        if qn == 0.0 or (norms == 0.0).any():
            raise DataValidationError("zero vector under cosine similarity")
        return scores / (norms * qn)
    raise DataValidationError(f"unknown similarity kind {kind!r}")


def lexicographic_rank(ids: Sequence[str]) -> np.ndarray:
    """rank[i] = position of ids[i] in the sorted id list (the tie-break key)."""
    arr = np.array(ids, dtype=np.str_)
    order = np.argsort(arr, kind="stable")
    rank = np.empty(len(ids), dtype=np.int64)
    rank[order] = np.arange(len(ids), dtype=np.int64)
    return rank


def _ranked_from_scores(
    query_id: str,
    scores: np.ndarray,
    docs: EmbeddingMatrix,
    tie_rank: np.ndarray,
    kind: str,
    k: int,
) -> RankedList:
    picks = kernels.topk_indices(scores, tie_rank, k)
    items = tuple((docs.ids[i], float(scores[i])) for i in picks)
    return RankedList(query_id, items, similarity=kind)


def top_k(
    query_vec,
    docs: EmbeddingMatrix,
    kind: str,
    k: int,
    query_id: str = "q",
) -> RankedList:
    """Exact top-k documents for one query vector, best first.

    k larger than the corpus degrades to a full ranking; k must be positive.
    """
    if k <= 0:
        raise DataValidationError("k must be positive")
    scores = score_corpus(query_vec, docs, kind)
    return _ranked_from_scores(
        query_id, scores, docs, lexicographic_rank(docs.ids), kind, k
    )


def retrieve_all(
    queries: EmbeddingMatrix,
    docs: EmbeddingMatrix,
    kind: str,
    k: int,
) -> dict[str, RankedList]:
    """Top-k rankings for every query, keyed by query id in query order."""
    if k <= 0:
        raise DataValidationError("k must be positive")
    if kind not in SIMILARITIES:
        raise DataValidationError(f"unknown similarity kind {kind!r}")
    if queries.dim != docs.dim:
        raise DataValidationError(
            f"query dim {queries.dim} does not match doc dim {docs.dim}"
        )
    tie_rank = lexicographic_rank(docs.ids)
    out: dict[str, RankedList] = {}
    for i, qid in enumerate(queries.ids):
        scores = score_corpus(queries.rows64()[i], docs, kind)
        out[qid] = _ranked_from_scores(qid, scores, docs, tie_rank, kind, k)
    return out


def sample_negatives(
    query_id: str,
    retrieved_ids: Sequence[str],
    corpus_ids: Sequence[str],
    count: int,
    seed: int,
) -> tuple[str, ...]:
    """Doc ids drawn uniformly without replacement from corpus minus retrieved.

    The draw is keyed by (seed, query_id), so it is stable across reruns and
    independent of processing order. Candidates keep corpus order; when fewer
    than ``count`` remain, all of them are returned.
    """
    if count <= 0:
        raise DataValidationError("negative sample count must be positive")
    excluded = set(retrieved_ids)
    candidates = [d for d in corpus_ids if d not in excluded]
    if not candidates:
        raise DataValidationError(
            f"no negative candidates left for query {query_id!r}"
        )
    if len(candidates) <= count:
        return tuple(candidates)
    rng = derive_rng(seed, "negatives", query_id)
    picks = rng.choice(len(candidates), size=count, replace=False)
    picks.sort()
    return tuple(candidates[i] for i in picks)


def score_ids(
    query_vec,
    docs: EmbeddingMatrix,
    doc_ids: Sequence[str],
    kind: str,
) -> np.ndarray:
    """Similarities of one query against an explicit id subset (float64)."""
    sub = docs.subset(doc_ids)
    return score_corpus(np.asarray(query_vec, dtype=np.float64), sub, kind)
