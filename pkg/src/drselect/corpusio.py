"""Dataset containers and on-disk formats.

Embeddings travel in a small binary container so that reruns are bitwise
reproducible and loads need no parsing:

    bytes 0-7    magic ``DREMB1\\x00\\x00``
    bytes 8-11   format version, u32 little-endian, currently 1
    bytes 12-15  vector dimension, u32 little-endian
    bytes 16-23  row count, u64 little-endian
    bytes 24-    row-major float32 little-endian payload, count * dim values

A sidecar text file at ``<path>.ids`` holds exactly ``count`` newline-
terminated UTF-8 ids, one per row, in row order.

Rankings and judgments use the conventional whitespace-separated run and
qrels layouts (``qid Q0 docid rank score tag`` / ``qid 0 docid grade``) so
external tooling can consume them directly. Effectiveness tables are plain
``model,dataset,value`` CSV.
"""

from __future__ import annotations

import csv
import io
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

from drselect.errors import DataValidationError

MAGIC = b"DREMB1\x00\x00"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<8sIIQ")

ROLES = ("query", "doc")
SIMILARITIES = ("dot", "cosine")


def _check_similarity(kind: str) -> str:
    if kind not in SIMILARITIES:
        raise DataValidationError(f"unknown similarity kind {kind!r}")
    return kind


def _check_role(role: str) -> str:
    if role not in ROLES:
        raise DataValidationError(f"unknown embedding role {role!r}")
    return role


def _check_unique(ids: Sequence[str], what: str) -> None:
    if len(set(ids)) != len(ids):
        seen = set()
        for item in ids:
            if item in seen:
                raise DataValidationError(f"duplicate id {item!r} in {what}")
            seen.add(item)


class EmbeddingMatrix:
    """Dense float32 vectors for one (model, role, dataset) combination.

    Rows are immutable after construction; ids are unique and parallel to
    rows. Derived float64 views used by scoring code are cached lazily.
    """

    __slots__ = ("model_id", "role", "ids", "rows", "_row_index", "_rows64", "_norms64")

    def __init__(self, model_id: str, role: str, ids: Iterable[str], rows: np.ndarray):
        self.model_id = str(model_id)
        self.role = _check_role(role)
        self.ids = tuple(str(i) for i in ids)
        arr = np.array(rows, dtype=np.float32, order="C", copy=True)
        if arr.ndim != 2:
            raise DataValidationError(f"rows must be 2-D, got shape {arr.shape}")
        if arr.shape[0] != len(self.ids):
            raise DataValidationError(
                f"id count mismatch: {len(self.ids)} ids for {arr.shape[0]} rows"
            )
        if arr.shape[1] == 0:
            raise DataValidationError("vector dimension must be positive")
        if arr.shape[0] == 0:
            raise DataValidationError("embedding matrix must have at least one row")
        if not np.isfinite(arr).all():
            raise DataValidationError("non-finite value in embedding rows")
        for item in self.ids:
            if not item:
                raise DataValidationError("empty id in embedding ids")
        _check_unique(self.ids, "embedding ids")
        arr.setflags(write=False)
        self.rows = arr
        self._row_index: dict[str, int] | None = None
        self._rows64: np.ndarray | None = None
        self._norms64: np.ndarray | None = None

    @property
    def dim(self) -> int:
        return int(self.rows.shape[1])

    @property
    def count(self) -> int:
        return int(self.rows.shape[0])

    def row_index(self) -> dict[str, int]:
        if self._row_index is None:
            self._row_index = {item: i for i, item in enumerate(self.ids)}
        return self._row_index

    def vector(self, item_id: str) -> np.ndarray:
        idx = self.row_index().get(item_id)
        if idx is None:
            raise DataValidationError(f"unknown id {item_id!r} for {self.model_id}/{self.role}")
        return self.rows[idx]

    def rows64(self) -> np.ndarray:
        """Float64 copy used for score arithmetic."""
        if self._rows64 is None:
            r = self.rows.astype(np.float64)
            r.setflags(write=False)
            self._rows64 = r
        return self._rows64

    def norms64(self) -> np.ndarray:
        if self._norms64 is None:
            n = np.linalg.norm(self.rows64(), axis=1)
            n.setflags(write=False)
            self._norms64 = n
        return self._norms64

    def subset(self, keep_ids: Sequence[str]) -> "EmbeddingMatrix":
        """Rows for ``keep_ids`` in the given order."""
        index = self.row_index()
        try:
            picks = [index[i] for i in keep_ids]
        except KeyError as exc:
            raise DataValidationError(f"unknown id {exc.args[0]!r} in subset") from None
        return EmbeddingMatrix(self.model_id, self.role, keep_ids, self.rows[picks])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingMatrix):
            return NotImplemented
        return (
            self.model_id == other.model_id
            and self.role == other.role
            and self.ids == other.ids
            and self.rows.shape == other.rows.shape
            and bool(np.array_equal(self.rows, other.rows))
        )

    __hash__ = None

    def __repr__(self) -> str:
        return (
            f"EmbeddingMatrix(model_id={self.model_id!r}, role={self.role!r}, "
            f"count={self.count}, dim={self.dim})"
        )


def write_embeddings(matrix: EmbeddingMatrix, path: str | Path) -> None:
    """Serialize to the binary container plus the ``.ids`` sidecar."""
    path = Path(path)
    header = _HEADER.pack(MAGIC, FORMAT_VERSION, matrix.dim, matrix.count)
    payload = np.ascontiguousarray(matrix.rows, dtype="<f4").tobytes()
    path.write_bytes(header + payload)
    ids_text = "".join(i + "\n" for i in matrix.ids)
    Path(str(path) + ".ids").write_bytes(ids_text.encode("utf-8"))


def read_embeddings(path: str | Path, model_id: str = "", role: str = "doc") -> EmbeddingMatrix:
    """Load a binary embedding file, validating header, payload and sidecar.

    ``model_id`` and ``role`` are not stored in the file; the caller supplies
    them from its own bookkeeping (config, file layout).
    """
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < _HEADER.size:
        raise DataValidationError(f"{path}: truncated header")
    magic, version, dim, count = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise DataValidationError(f"{path}: bad magic")
    if version != FORMAT_VERSION:
        raise DataValidationError(f"{path}: unsupported format version {version}")
    if dim == 0:
        raise DataValidationError(f"{path}: vector dimension must be positive")
    expected = _HEADER.size + 4 * dim * count
    if len(blob) < expected:
        raise DataValidationError(f"{path}: truncated payload")
    if len(blob) > expected:
        raise DataValidationError(f"{path}: trailing bytes after payload")
    flat = np.frombuffer(blob, dtype="<f4", offset=_HEADER.size)
    rows = flat.reshape(count, dim)

    ids_path = Path(str(path) + ".ids")
    if not ids_path.exists():
        raise DataValidationError(f"{ids_path}: missing ids sidecar")
    ids_blob = ids_path.read_bytes().decode("utf-8")
    if ids_blob and not ids_blob.endswith("\n"):
        raise DataValidationError(f"{ids_path}: final id line not newline-terminated")
    ids = ids_blob.split("\n")[:-1] if ids_blob else []
    if len(ids) != count:
        raise DataValidationError(
            f"{ids_path}: id count mismatch, {len(ids)} ids for {count} rows"
        )
    return EmbeddingMatrix(model_id, role, ids, rows)


@dataclass(frozen=True)
class RankedList:
    """One query's retrieved documents, best first.

    ``items`` holds (doc_id, score) pairs with strictly decreasing rank
    quality: scores never increase and doc ids never repeat.
    """

    query_id: str
    items: tuple[tuple[str, float], ...]
    similarity: str = "dot"

    def __post_init__(self):
        object.__setattr__(
            self, "items", tuple((str(d), float(s)) for d, s in self.items)
        )
        _check_similarity(self.similarity)
        _check_unique([d for d, _ in self.items], f"ranking for query {self.query_id!r}")
        prev = math.inf
        for doc_id, score in self.items:
            if not math.isfinite(score):
                raise DataValidationError(
                    f"non-finite score for query {self.query_id!r} doc {doc_id!r}"
                )
            if score > prev:
                raise DataValidationError(
                    f"scores increase at doc {doc_id!r} for query {self.query_id!r}"
                )
            prev = score

    def doc_ids(self) -> tuple[str, ...]:
        return tuple(d for d, _ in self.items)

    def scores(self) -> np.ndarray:
        return np.array([s for _, s in self.items], dtype=np.float64)

    def truncated(self, k: int) -> "RankedList":
        return RankedList(self.query_id, self.items[:k], self.similarity)

    def __len__(self) -> int:
        return len(self.items)


@dataclass(frozen=True)
class Qrels:
    """Relevance judgments: (query_id, doc_id) -> integer grade >= 0."""

    grades: Mapping[tuple[str, str], int]

    def __post_init__(self):
        clean: dict[tuple[str, str], int] = {}
        for (qid, did), grade in dict(self.grades).items():
            grade = int(grade)
            if grade < 0:
                raise DataValidationError(
                    f"negative relevance grade for query {qid!r} doc {did!r}"
                )
            clean[(str(qid), str(did))] = grade
        object.__setattr__(self, "grades", clean)

    def query_ids(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for qid, _ in self.grades:
            seen.setdefault(qid, None)
        return tuple(seen)

    def grades_for(self, query_id: str) -> dict[str, int]:
        return {d: g for (q, d), g in self.grades.items() if q == query_id}

    def has_relevant(self, query_id: str) -> bool:
        return any(g > 0 for (q, _), g in self.grades.items() if q == query_id)


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    similarity: str
    display_name: str = ""

    def __post_init__(self):
        if not self.model_id:
            raise DataValidationError("model_id must be non-empty")
        _check_similarity(self.similarity)
        if not self.display_name:
            object.__setattr__(self, "display_name", self.model_id)


@dataclass(frozen=True)
class ModelRegistry:
    """The model pool in canonical order.

    Registry position doubles as the deterministic tie-breaker whenever two
    models score identically, so the order is part of the contract.
    """

    entries: tuple[ModelEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        if not self.entries:
            raise DataValidationError("registry must contain at least one model")
        _check_unique([e.model_id for e in self.entries], "model registry")

    def model_ids(self) -> tuple[str, ...]:
        return tuple(e.model_id for e in self.entries)

    def index(self, model_id: str) -> int:
        for i, entry in enumerate(self.entries):
            if entry.model_id == model_id:
                return i
        raise DataValidationError(f"model {model_id!r} not in registry")

    def entry(self, model_id: str) -> ModelEntry:
        return self.entries[self.index(model_id)]

    def similarity(self, model_id: str) -> str:
        return self.entry(model_id).similarity

    def __iter__(self) -> Iterator[ModelEntry]:
        return iter(self.entries)

    def __len__(self) -> int:
        return len(self.entries)


@dataclass(frozen=True)
class DatasetBundle:
    """Everything known about one dataset apart from model embeddings.

    ``queries`` maps query id to raw text (non-empty); ``doc_ids`` is the
    corpus in canonical order; ``qrels`` may be None for unlabeled targets.
    """

    name: str
    queries: Mapping[str, str]
    doc_ids: tuple[str, ...]
    qrels: Qrels | None = None

    def __post_init__(self):
        if not self.name:
            raise DataValidationError("dataset name must be non-empty")
        queries = {str(q): str(t) for q, t in dict(self.queries).items()}
        for qid, text in queries.items():
            if not text.strip():
                raise DataValidationError(f"empty text for query {qid!r} in {self.name}")
        object.__setattr__(self, "queries", queries)
        object.__setattr__(self, "doc_ids", tuple(str(d) for d in self.doc_ids))
        _check_unique(self.doc_ids, f"doc ids of {self.name}")


@dataclass(frozen=True)
class EffectivenessTable:
    """Ground-truth effectiveness: (model_id, dataset) -> value in [0, 1]."""

    metric: str
    values: Mapping[tuple[str, str], float]

    def __post_init__(self):
        clean: dict[tuple[str, str], float] = {}
        for (model, dataset), value in dict(self.values).items():
            value = float(value)
            if not (0.0 <= value <= 1.0):
                raise DataValidationError(
                    f"effectiveness {value} for ({model}, {dataset}) outside [0, 1]"
                )
            clean[(str(model), str(dataset))] = value
        object.__setattr__(self, "values", clean)

    def value(self, model_id: str, dataset: str) -> float:
        try:
            return self.values[(model_id, dataset)]
        except KeyError:
            raise DataValidationError(
                f"no effectiveness value for ({model_id}, {dataset})"
            ) from None

    def column(self, dataset: str) -> dict[str, float]:
        col = {m: v for (m, d), v in self.values.items() if d == dataset}
        if not col:
            raise DataValidationError(f"no effectiveness values for dataset {dataset!r}")
        return col

    def datasets(self) -> tuple[str, ...]:
        seen: dict[str, None] = {}
        for _, dataset in self.values:
            seen.setdefault(dataset, None)
        return tuple(seen)


# --- text formats ---------------------------------------------------------


def _data_lines(path: Path) -> Iterator[tuple[int, str]]:
    """Non-empty lines with 1-based numbers, skipping leading '#' comments."""
    with path.open("r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.rstrip("\n").rstrip("\r")
            if not line.strip():
                continue
            if line.lstrip().startswith("#"):
                continue
            yield lineno, line


def read_run(path: str | Path, similarity: str = "dot") -> dict[str, RankedList]:
    """Parse a run file into per-query rankings, keyed by query id.

    Queries keep first-appearance order; within a query, items are ordered by
    the rank column and the score column must agree with it (non-increasing).
    """
    path = Path(path)
    rows: dict[str, list[tuple[int, str, float]]] = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 6:
            raise DataValidationError(f"{path}:{lineno}: expected 6 columns, got {len(parts)}")
        qid, _q0, did, rank_s, score_s, _tag = parts
        try:
            rank = int(rank_s)
            score = float(score_s)
        except ValueError:
            raise DataValidationError(f"{path}:{lineno}: bad rank or score") from None
        rows.setdefault(qid, []).append((rank, did, score))
    out: dict[str, RankedList] = {}
    for qid, entries in rows.items():
        entries.sort(key=lambda e: e[0])
        try:
            out[qid] = RankedList(
                qid, tuple((d, s) for _, d, s in entries), similarity=similarity
            )
        except DataValidationError as exc:
            raise DataValidationError(f"{path}: rank/score order disagreement: {exc}") from None
    return out


def write_run(runs: Mapping[str, RankedList], path: str | Path, tag: str = "drselect") -> None:
    path = Path(path)
    buf = io.StringIO()
    for qid in runs:
        for rank, (did, score) in enumerate(runs[qid].items, start=1):
            buf.write(f"{qid} Q0 {did} {rank} {score!r} {tag}\n")
    path.write_bytes(buf.getvalue().encode("utf-8"))


def read_qrels(path: str | Path) -> Qrels:
    path = Path(path)
    grades: dict[tuple[str, str], int] = {}
    for lineno, line in _data_lines(path):
        parts = line.split()
        if len(parts) != 4:
            raise DataValidationError(f"{path}:{lineno}: expected 4 columns, got {len(parts)}")
        qid, _zero, did, grade_s = parts
        try:
            grade = int(grade_s)
        except ValueError:
            raise DataValidationError(f"{path}:{lineno}: bad relevance grade") from None
        key = (qid, did)
        if key in grades:
            raise DataValidationError(f"{path}:{lineno}: duplicate judgment for {qid} {did}")
        grades[key] = grade
    try:
        return Qrels(grades)
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc}") from None


def write_qrels(qrels: Qrels, path: str | Path) -> None:
    lines = [f"{qid} 0 {did} {grade}\n" for (qid, did), grade in qrels.grades.items()]
    Path(path).write_bytes("".join(lines).encode("utf-8"))


def read_query_texts(path: str | Path) -> dict[str, str]:
    """Read ``qid<TAB>text`` lines, preserving order."""
    path = Path(path)
    out: dict[str, str] = {}
    for lineno, line in _data_lines(path):
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataValidationError(f"{path}:{lineno}: expected qid<TAB>text")
        qid, text = parts
        if qid in out:
            raise DataValidationError(f"{path}:{lineno}: duplicate query id {qid!r}")
        out[qid] = text
    return out


def write_query_texts(
    queries: Mapping[str, str], path: str | Path, header_comment: str = ""
) -> None:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    for qid, text in queries.items():
        if "\t" in qid or "\n" in qid or "\n" in text or "\t" in text:
            raise DataValidationError(f"query {qid!r} contains tab or newline")
        buf.write(f"{qid}\t{text}\n")
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_id_list(path: str | Path) -> tuple[str, ...]:
    """One id per line; used for corpus doc-id lists."""
    ids = [line for _, line in _data_lines(Path(path))]
    _check_unique(ids, str(path))
    return tuple(ids)


def write_id_list(ids: Sequence[str], path: str | Path) -> None:
    Path(path).write_bytes("".join(i + "\n" for i in ids).encode("utf-8"))


def read_effectiveness(path: str | Path) -> EffectivenessTable:
    """CSV with header ``model,dataset,value``; '#' comment lines allowed."""
    path = Path(path)
    with path.open("r", encoding="utf-8", newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].lstrip().startswith("#")]
    if not rows or [c.strip() for c in rows[0]] != ["model", "dataset", "value"]:
        raise DataValidationError(f"{path}: expected header model,dataset,value")
    values: dict[tuple[str, str], float] = {}
    metric = "ndcg@10"
    for row in rows[1:]:
        if len(row) != 3:
            raise DataValidationError(f"{path}: expected 3 columns, got {row!r}")
        model, dataset, value_s = row
        key = (model, dataset)
        if key in values:
            raise DataValidationError(f"{path}: duplicate cell for ({model}, {dataset})")
        try:
            values[key] = float(value_s)
        except ValueError:
            raise DataValidationError(f"{path}: bad value {value_s!r}") from None
    try:
        return EffectivenessTable(metric, values)
    except DataValidationError as exc:
        raise DataValidationError(f"{path}: {exc}") from None


def write_effectiveness(
    table: EffectivenessTable, path: str | Path, header_comment: str = ""
) -> None:
    buf = io.StringIO()
    if header_comment:
        buf.write(f"# {header_comment}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["model", "dataset", "value"])
    for (model, dataset), value in sorted(table.values.items()):
        writer.writerow([model, dataset, repr(value)])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_registry(path: str | Path) -> ModelRegistry:
    """JSON list of {model_id, similarity, display_name} objects, in order."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DataValidationError(f"{path}: invalid JSON: {exc}") from None
    return registry_from_obj(raw, where=str(path))


def registry_from_obj(raw, where: str = "registry") -> ModelRegistry:
    if not isinstance(raw, list):
        raise DataValidationError(f"{where}: expected a JSON list of model entries")
    entries = []
    for item in raw:
        if not isinstance(item, dict) or "model_id" not in item or "similarity" not in item:
            raise DataValidationError(f"{where}: each entry needs model_id and similarity")
        entries.append(
            ModelEntry(
                model_id=item["model_id"],
                similarity=item["similarity"],
                display_name=item.get("display_name", ""),
            )
        )
    return ModelRegistry(tuple(entries))


def write_registry(registry: ModelRegistry, path: str | Path) -> None:
    obj = [
        {
            "model_id": e.model_id,
            "similarity": e.similarity,
            "display_name": e.display_name,
        }
        for e in registry
    ]
    Path(path).write_bytes((json.dumps(obj, indent=2) + "\n").encode("utf-8"))
