"""Ground-truth effectiveness: nDCG@k over runs and qrels.

Gains are linear (the raw relevance grade) discounted by log2(rank + 1).
The ideal DCG sorts the query's judged grades descending and truncates at k.
Queries absent from the qrels are skipped with a diagnostic; queries judged
but without any relevant document are excluded from the mean, since nDCG is
undefined for them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from drselect.corpusio import EffectivenessTable, ModelRegistry, Qrels, RankedList
from drselect.errors import DataValidationError
from drselect.selectors import ModelRanking


def dcg(grades: Sequence[int]) -> float:
    return sum(g / math.log2(i + 2) for i, g in enumerate(grades))


def ndcg_at_k(run: RankedList, qrels: Qrels, k: int = 10) -> float:
    """nDCG@k of one query's ranking.

    Raises when the query has no relevant document (the caller decides how
    to exclude such queries); unjudged retrieved docs count grade zero.
    """
    if k <= 0:
        raise DataValidationError("k must be positive")
    judged = qrels.grades_for(run.query_id)
    if not judged:
        raise DataValidationError(f"query {run.query_id!r} missing from qrels")
    ideal = sorted((g for g in judged.values() if g > 0), reverse=True)[:k]
    if not ideal:
        raise DataValidationError(
            f"query {run.query_id!r} has no relevant documents"
        )
    gains = [judged.get(d, 0) for d, _ in run.items[:k]]
    return dcg(gains) / dcg(ideal)


@dataclass(frozen=True)
class MeanEffectiveness:
    """Dataset-level nDCG plus the per-query breakdown and skip diagnostics."""

    value: float
    per_query: Mapping[str, float]
    skipped_unjudged: tuple[str, ...]
    skipped_no_relevant: tuple[str, ...]


def mean_ndcg(
    runs: Mapping[str, RankedList], qrels: Qrels, k: int = 10
) -> MeanEffectiveness:
    """Mean nDCG@k over the scorable queries of a run set."""
    per_query: dict[str, float] = {}
    skipped_unjudged: list[str] = []
    skipped_no_relevant: list[str] = []
    judged_queries = set(qrels.query_ids())
    for qid, run in runs.items():
        if qid not in judged_queries:
            skipped_unjudged.append(qid)
            continue
        if not qrels.has_relevant(qid):
            skipped_no_relevant.append(qid)
            continue
        per_query[qid] = ndcg_at_k(run, qrels, k)
    if not per_query:
        raise DataValidationError("no scorable queries (all skipped)")
    value = sum(per_query.values()) / len(per_query)
    return MeanEffectiveness(
        value=value,
        per_query=per_query,
        skipped_unjudged=tuple(skipped_unjudged),
        skipped_no_relevant=tuple(skipped_no_relevant),
    )


def truth_ranking(
    effectiveness: EffectivenessTable, dataset: str, registry: ModelRegistry
) -> ModelRanking:
    """Models ordered by measured effectiveness, registry order on ties."""
    column = effectiveness.column(dataset)
    for model_id in registry.model_ids():
        if model_id not in column:
            raise DataValidationError(
                f"no {dataset} effectiveness for model {model_id!r}"
            )
    ordered = sorted(
        registry.model_ids(), key=lambda m: (-column[m], registry.index(m))
    )
    entries = tuple((m, column[m]) for m in ordered)
    return ModelRanking(dataset, entries, provenance="truth")
