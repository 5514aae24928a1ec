"""The six model-selection criteria and per-dataset ranking assembly.

Each criterion reduces one model's embeddings (or runs) on one dataset to a
single scalar. A MethodScoreTable collects those scalars for every model in
the registry; assemble_ranking orders it into a predicted model ranking with
the registry as deterministic tie-break.

Orientation is fixed per method: in-domain effectiveness and query
similarity are higher-better; both Fréchet criteria, entropy, and
perturbation sensitivity are lower-better.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from drselect import retrieval
from drselect.corpusio import (
    EffectivenessTable,
    EmbeddingMatrix,
    ModelRegistry,
    RankedList,
)
from drselect.errors import DataValidationError
from drselect.gaussdist import frechet_distance, summarize

HIGHER = "higher_better"
LOWER = "lower_better"

METHOD_ORIENTATIONS = {
    "indomain": HIGHER,
    "qsim": HIGHER,
    "fd_corpus": LOWER,
    "fd_extracted": LOWER,
    "entropy": LOWER,
    "qalter": LOWER,
}

PROB_FLOOR = 1e-6  # clamp for probability-at-rank before the entropy log


@dataclass(frozen=True)
class QueryScoreDetail:
    """Per-query intermediate value behind a model's criterion score."""

    query_id: str
    value: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise DataValidationError(
                f"non-finite detail value for query {self.query_id!r}"
            )


@dataclass(frozen=True)
class MethodScoreTable:
    """One criterion's scalar per model, for one (method, dataset) pair."""

    method: str
    dataset: str
    scores: Mapping[str, float]
    orientation: str
    params: Mapping[str, object]

    def __post_init__(self):
        if self.method not in METHOD_ORIENTATIONS:
            raise DataValidationError(f"unknown method {self.method!r}")
        if self.orientation != METHOD_ORIENTATIONS[self.method]:
            raise DataValidationError(
                f"orientation {self.orientation!r} wrong for method {self.method!r}"
            )
        scores = {str(m): float(s) for m, s in dict(self.scores).items()}
        for model, score in scores.items():
            if not math.isfinite(score):
                raise DataValidationError(f"non-finite score for model {model!r}")
        if not scores:
            raise DataValidationError("score table has no models")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "params", dict(self.params))

    def label(self) -> str:
        """Method key plus the distinguishing parameter, e.g. ``entropy@10``."""
        return method_label(self.method, self.params)


def method_label(method: str, params: Mapping[str, object]) -> str:
    if method == "entropy":
        return f"entropy@{params['cutoff']}"
    if method == "qalter":
        return f"qalter@{params['p']}"
    if method == "fd_extracted":
        return f"fd_extracted@{params['k']}"
    return method


@dataclass(frozen=True)
class ModelRanking:
    """Models ordered best-first with their goodness scores."""

    dataset: str
    entries: tuple[tuple[str, float], ...]
    provenance: str

    def __post_init__(self):
        object.__setattr__(
            self, "entries", tuple((str(m), float(s)) for m, s in self.entries)
        )
        if not self.entries:
            raise DataValidationError("ranking has no entries")
        models = [m for m, _ in self.entries]
        if len(set(models)) != len(models):
            raise DataValidationError("duplicate model in ranking")

    def model_ids(self) -> tuple[str, ...]:
        return tuple(m for m, _ in self.entries)

    def best(self) -> str:
        return self.entries[0][0]

    def position(self, model_id: str) -> int:
        for i, (m, _) in enumerate(self.entries):
            if m == model_id:
                return i
        raise DataValidationError(f"model {model_id!r} not in ranking")


def assemble_ranking(table: MethodScoreTable, registry: ModelRegistry) -> ModelRanking:
    """Order registry models by the table's scores, registry order on ties.

    Goodness is the raw score for higher-better methods and its negation for
    lower-better ones, so the ranking always reads best-first.
    """
    for model_id in registry.model_ids():
        if model_id not in table.scores:
            raise DataValidationError(
                f"model {model_id!r} missing from {table.method} scores"
            )
    extra = set(table.scores) - set(registry.model_ids())
    if extra:
        raise DataValidationError(f"scores for unknown models: {sorted(extra)}")
    sign = 1.0 if table.orientation == HIGHER else -1.0
    ordered = sorted(
        registry.model_ids(),
        key=lambda m: (-sign * table.scores[m], registry.index(m)),
    )
    entries = tuple((m, sign * table.scores[m]) for m in ordered)
    return ModelRanking(table.dataset, entries, provenance=table.label())


# --- method 1: source-domain effectiveness --------------------------------


def select_indomain(
    effectiveness: EffectivenessTable,
    source_dataset: str,
    registry: ModelRegistry,
    dataset: str = "",
) -> MethodScoreTable:
    """Rank models by their measured effectiveness on the source dataset.

    The same table applies to every target dataset; ``dataset`` only labels
    the table for downstream bookkeeping.
    """
    column = effectiveness.column(source_dataset)
    scores = {}
    for model_id in registry.model_ids():
        if model_id not in column:
            raise DataValidationError(
                f"no {source_dataset} effectiveness for model {model_id!r}"
            )
        scores[model_id] = column[model_id]
    return MethodScoreTable(
        method="indomain",
        dataset=dataset or source_dataset,
        scores=scores,
        orientation=HIGHER,
        params={"source_dataset": source_dataset},
    )


# --- method 2: query representation similarity ----------------------------


def _unit_rows(matrix: EmbeddingMatrix, what: str) -> np.ndarray:
    rows = matrix.rows64()
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    if (norms == 0.0).any():
        raise DataValidationError(f"zero-norm vector in {what}")
    return rows / norms

def query_similarity_score(
    src_q: EmbeddingMatrix, tgt_q: EmbeddingMatrix
) -> tuple[float, tuple[QueryScoreDetail, ...]]:
    """Mean over target queries of the best cosine to any source query.

    Cosine is used regardless of the model's retrieval similarity: raw dot
    scores are not comparable across models with different score ranges.
    """
    if src_q.dim != tgt_q.dim:
        raise DataValidationError(
            f"query dim mismatch: {src_q.dim} vs {tgt_q.dim}"
        )
    src_unit = _unit_rows(src_q, "source queries")
    tgt_unit = _unit_rows(tgt_q, "target queries")
    best = tgt_unit @ src_unit.T  # (n_tgt, n_src) cosine matrix
    tqr = best.max(axis=1)
    details = tuple(
        QueryScoreDetail(qid, float(v)) for qid, v in zip(tgt_q.ids, tqr)
    )
    return float(tqr.mean()), details


# --- methods 3 and 4: Fréchet criteria -------------------------------------


def _summary_with_small_sample_ridge(rows: np.ndarray):
    """Gaussian summary; ridge-regularized when rows don't exceed the dim.

    With n <= d the sample covariance is singular, which makes the matrix
    square root numerically fragile; a 1e-6 diagonal ridge stabilizes it.
    """
    summary = summarize(rows)
    if summary.count <= summary.dim:
        summary = summary.with_ridge()
    return summary


def corpus_fd_score(src_docs: EmbeddingMatrix, tgt_docs: EmbeddingMatrix) -> float:
    """Fréchet distance between whole-corpus embedding distributions."""
    if src_docs.dim != tgt_docs.dim:
        raise DataValidationError(
            f"doc dim mismatch: {src_docs.dim} vs {tgt_docs.dim}"
        )
    return frechet_distance(
        _summary_with_small_sample_ridge(src_docs.rows64()),
        _summary_with_small_sample_ridge(tgt_docs.rows64()),
    )


def extracted_fd_score(
    tgt_queries: EmbeddingMatrix,
    src_docs: EmbeddingMatrix,
    tgt_docs: EmbeddingMatrix,
    kind: str,
    k: int = 100,
) -> tuple[float, tuple[QueryScoreDetail, ...]]:
    """Mean per-query Fréchet distance between extracted document sets.

    Each target query retrieves its top-k documents from the source corpus
    and from the target corpus with the model's own similarity; the two
    extracted embedding sets are then compared as Gaussians. k is capped at
    either corpus size.
    """
    if k <= 0:
        raise DataValidationError("k must be positive")
    if src_docs.dim != tgt_docs.dim or tgt_queries.dim != src_docs.dim:
        raise DataValidationError("query/doc dimension mismatch")
    src_rank = retrieval.lexicographic_rank(src_docs.ids)
    tgt_rank = retrieval.lexicographic_rank(tgt_docs.ids)
    details = []
    for i, qid in enumerate(tgt_queries.ids):
        q = tgt_queries.rows64()[i]
        fd = frechet_distance(
            _summary_with_small_sample_ridge(
                _extract_rows(q, src_docs, src_rank, kind, k)
            ),
            _summary_with_small_sample_ridge(
                _extract_rows(q, tgt_docs, tgt_rank, kind, k)
            ),
        )
        details.append(QueryScoreDetail(qid, fd))
    score = float(np.mean([d.value for d in details]))
    return score, tuple(details)


def _extract_rows(query_vec, docs, tie_rank, kind, k) -> np.ndarray:
    from drselect import kernels

    scores = retrieval.score_corpus(query_vec, docs, kind)
    picks = kernels.topk_indices(scores, tie_rank, min(k, docs.count))
    return docs.rows64()[picks]


# --- method 5: binary entropy of probability-at-rank -----------------------


def binary_entropy(p: float) -> float:
    """H(p) in bits; p is expected to be clamped away from 0 and 1 already."""
    return float(-p * math.log2(p) - (1.0 - p) * math.log2(1.0 - p))


def query_entropy(scores: Sequence[float], negative_min: float) -> float:
    """H^q: summed binary entropy of probability-at-rank for one query.

    Probabilities normalize the retrieval scores against the worst sampled
    negative: p_i = (s_i - min) / (s_1 - min), clamped to
    [1e-6, 1 - 1e-6]. A degenerate query whose best score equals the
    negative minimum gets p_i = 1e-6 everywhere.
    """
    if len(scores) == 0:
        raise DataValidationError("query has no scores")
    s = np.asarray(scores, dtype=np.float64)
    top = float(s[0])
    span = top - float(negative_min)
    if span == 0.0:
        p = np.full(s.shape, PROB_FLOOR)
    else:
        p = (s - negative_min) / span
        p = np.clip(p, PROB_FLOOR, 1.0 - PROB_FLOOR)
    return float(sum(binary_entropy(float(pi)) for pi in p))


def binary_entropy_score(
    runs: Mapping[str, RankedList],
    negative_mins: Mapping[str, float],
    cutoff: int,
) -> tuple[float, tuple[QueryScoreDetail, ...]]:
    """H_R: mean per-query entropy at the given rank cutoff (lower = surer)."""
    if cutoff <= 0:
        raise DataValidationError("cutoff must be positive")
    if not runs:
        raise DataValidationError("no runs to score")
    details = []
    for qid, run in runs.items():
        if qid not in negative_mins:
            raise DataValidationError(f"no negative minimum for query {qid!r}")
        scores = [s for _, s in run.items[:cutoff]]
        details.append(
            QueryScoreDetail(qid, query_entropy(scores, negative_mins[qid]))
        )
    return float(np.mean([d.value for d in details])), tuple(details)


# --- method 6: sensitivity to query alteration -----------------------------


def query_alteration_score(
    original_runs: Mapping[str, RankedList],
    original_q: EmbeddingMatrix,
    perturbed_q: EmbeddingMatrix,
    docs: EmbeddingMatrix,
    kind: str,
    k: int = 10,
) -> tuple[float, tuple[QueryScoreDetail, ...]]:
    """Pooled std of score changes when queries are rewritten with masks.

    For every perturbed variant of a query and every doc in that query's
    original top-k, delta = similarity(perturbed vector, doc) - original
    score. The criterion is the sample standard deviation (n-1) of all
    deltas pooled across docs, trials, and queries. Details carry each
    variant's mean delta.
    """
    from drselect.perturb import parse_perturbed_id

    if k <= 0:
        raise DataValidationError("k must be positive")
    original_ids = set(original_q.ids)
    deltas: list[float] = []
    details = []
    for i, pid in enumerate(perturbed_q.ids):
        qid, _trial = parse_perturbed_id(pid)
        if qid not in original_ids:
            raise DataValidationError(
                f"perturbed id {pid!r} has no original query {qid!r}"
            )
        if qid not in original_runs:
            raise DataValidationError(f"no original run for query {qid!r}")
        run = original_runs[qid]
        top = run.items[:k]
        if not top:
            raise DataValidationError(f"empty original run for query {qid!r}")
        doc_ids = [d for d, _ in top]
        new_scores = retrieval.score_ids(
            perturbed_q.rows64()[i], docs, doc_ids, kind
        )
        old_scores = np.array([s for _, s in top], dtype=np.float64)
        query_deltas = new_scores - old_scores
        deltas.extend(float(d) for d in query_deltas)
        details.append(QueryScoreDetail(pid, float(query_deltas.mean())))
    if len(deltas) < 2:
        raise DataValidationError(
            "need at least two score deltas for a standard deviation"
        )
    score = float(np.std(np.asarray(deltas), ddof=1))
    return score, tuple(details)


# --- score table CSV --------------------------------------------------------


def write_score_table(
    table: MethodScoreTable, path: str | Path, header_comment: str = ""
) -> None:
    """CSV columns: method,dataset,model,score,orientation,params_json."""
    params_json = json.dumps(table.params, sort_keys=True)
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["method", "dataset", "model", "score", "orientation", "params_json"])
    for model in sorted(table.scores):
        writer.writerow(
            [
                table.method,
                table.dataset,
                model,
                repr(table.scores[model]),
                table.orientation,
                params_json,
            ]
        )
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_score_table(path: str | Path) -> MethodScoreTable:
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    header = ["method", "dataset", "model", "score", "orientation", "params_json"]
    if not rows or [c.strip() for c in rows[0]] != header:
        raise DataValidationError(f"{path}: expected header {','.join(header)}")
    body = rows[1:]
    if not body:
        raise DataValidationError(f"{path}: empty score table")
    keys = {(r[0], r[1], r[4], r[5]) for r in body}
    if len(keys) != 1:
        raise DataValidationError(f"{path}: mixed method/dataset/params rows")
    method, dataset, orientation, params_json = next(iter(keys))
    scores: dict[str, float] = {}
    for r in body:
        if len(r) != 6:
            raise DataValidationError(f"{path}: expected 6 columns, got {r!r}")
        if r[2] in scores:
            raise DataValidationError(f"{path}: duplicate model {r[2]!r}")
        scores[r[2]] = float(r[3])
    return MethodScoreTable(
        method=method,
        dataset=dataset,
        scores=scores,
        orientation=orientation,
        params=json.loads(params_json),
    )
