"""Embedding file format, run/qrels/effectiveness parsing, and validation."""

from __future__ import annotations

import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from drselect.corpusio import (
    MAGIC,
    EffectivenessTable,
    EmbeddingMatrix,
    ModelEntry,
    ModelRegistry,
    Qrels,
    RankedList,
    read_effectiveness,
    read_embeddings,
    read_id_list,
    read_qrels,
    read_query_texts,
    read_registry,
    read_run,
    write_effectiveness,
    write_embeddings,
    write_id_list,
    write_qrels,
    write_query_texts,
    write_registry,
    write_run,
)
from drselect.errors import DataValidationError

from matrixhelper import make_matrix


# --- embedding binary format ------------------------------------------------


def test_file_size_is_24_header_bytes_plus_4_bytes_per_value(tmp_path):
    m = make_matrix(["a", "b"], [[1, 2, 3], [4, 5, 6]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    assert path.stat().st_size == 24 + 2 * 3 * 4
    ids_lines = (tmp_path / "m.emb.ids").read_text().splitlines()
    assert ids_lines == ["a", "b"]


def test_write_then_read_round_trips_bitwise(tmp_path):
    rows = np.array([[0.25, -1.5], [3.0, 1e-20], [7.25, 2.0]], dtype=np.float32)
    m = make_matrix(["x", "y", "z"], rows)
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    back = read_embeddings(path, model_id="m", role="doc")
    assert back == m
    assert back.rows.dtype == np.float32
    assert np.array_equal(back.rows, rows)


def test_serialization_is_deterministic(tmp_path):
    m = make_matrix(["a", "b"], [[1, 2], [3, 4]])
    p1, p2 = tmp_path / "one.emb", tmp_path / "two.emb"
    write_embeddings(m, p1)
    write_embeddings(m, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert (tmp_path / "one.emb.ids").read_bytes() == (tmp_path / "two.emb.ids").read_bytes()


def test_duplicate_ids_rejected():
    with pytest.raises(DataValidationError, match="duplicate id"):
        make_matrix(["a", "a"], [[1.0], [2.0]])


def test_nan_rows_rejected():
    with pytest.raises(DataValidationError, match="finite"):
        make_matrix(["a"], [[float("nan")]])


def test_empty_matrix_rejected():
    with pytest.raises(DataValidationError):
        make_matrix([], np.zeros((0, 4), dtype=np.float32))


def test_id_count_mismatch_rejected():
    with pytest.raises(DataValidationError):
        make_matrix(["a", "b"], [[1.0]])


def test_truncated_payload_is_detected(tmp_path):
    m = make_matrix(["a", "b"], [[1, 2], [3, 4]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    data = path.read_bytes()
    path.write_bytes(data[:-1])
    with pytest.raises(DataValidationError, match="truncated payload"):
        read_embeddings(path)


def test_trailing_bytes_are_detected(tmp_path):
    m = make_matrix(["a"], [[1, 2]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    path.write_bytes(path.read_bytes() + b"\x00")
    with pytest.raises(DataValidationError, match="trailing bytes"):
        read_embeddings(path)


def test_bad_magic_is_detected(tmp_path):
    m = make_matrix(["a"], [[1.0]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    data = bytearray(path.read_bytes())
    data[0] ^= 0xFF
    path.write_bytes(bytes(data))
    with pytest.raises(DataValidationError, match="bad magic"):
        read_embeddings(path)


def test_unsupported_version_is_detected(tmp_path):
    m = make_matrix(["a"], [[1.0]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    data = bytearray(path.read_bytes())
    data[8:12] = struct.pack("<I", 99)
    path.write_bytes(bytes(data))
    with pytest.raises(DataValidationError, match="version"):
        read_embeddings(path)


def test_truncated_header_is_detected(tmp_path):
    path = tmp_path / "m.emb"
    path.write_bytes(MAGIC[:4])
    with pytest.raises(DataValidationError, match="truncated header"):
        read_embeddings(path)


def test_ids_sidecar_line_count_must_match(tmp_path):
    m = make_matrix(["a", "b"], [[1, 2], [3, 4]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    (tmp_path / "m.emb.ids").write_text("a\nb\nc\n")
    with pytest.raises(DataValidationError, match="id count mismatch"):
        read_embeddings(path)


def test_missing_ids_sidecar_is_an_error(tmp_path):
    m = make_matrix(["a"], [[1.0]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    (tmp_path / "m.emb.ids").unlink()
    with pytest.raises((DataValidationError, OSError)):
        read_embeddings(path)


def test_unterminated_ids_file_is_detected(tmp_path):
    m = make_matrix(["a", "b"], [[1, 2], [3, 4]])
    path = tmp_path / "m.emb"
    write_embeddings(m, path)
    sidecar = tmp_path / "m.emb.ids"
    sidecar.write_bytes(sidecar.read_bytes().rstrip(b"\n"))
    with pytest.raises(DataValidationError):
        read_embeddings(path)


@settings(max_examples=50, deadline=None)
@given(
    n=st.integers(min_value=1, max_value=8),
    dim=st.integers(min_value=1, max_value=12),
    seed=st.integers(min_value=0, max_value=2**31),
)
def test_random_matrices_round_trip_exactly(tmp_path_factory, n, dim, seed):
    rng = np.random.default_rng(seed)
    rows = rng.normal(size=(n, dim)).astype(np.float32)
    ids = tuple(f"doc-{i}" for i in range(n))
    m = make_matrix(ids, rows)
    path = tmp_path_factory.mktemp("rt") / "m.emb"
    write_embeddings(m, path)
    assert read_embeddings(path, model_id="m", role="doc") == m


def test_matrix_lookup_helpers():
    m = make_matrix(["a", "b"], [[1, 2], [3, 4]])
    assert m.dim == 2 and m.count == 2
    assert np.array_equal(m.vector("b"), np.array([3, 4], dtype=np.float32))
    sub = m.subset(["b"])
    assert sub.ids == ("b",) and sub.count == 1
    with pytest.raises(DataValidationError):
        m.vector("missing")
    with pytest.raises(DataValidationError):
        m.subset(["a", "nope"])


# --- ranked lists and run files ----------------------------------------------


def test_ranked_list_requires_nonincreasing_scores():
    RankedList("q1", (("d1", 0.9), ("d2", 0.8)))
    with pytest.raises(DataValidationError):
        RankedList("q1", (("d1", 0.8), ("d2", 0.9)))
    with pytest.raises(DataValidationError, match="duplicate"):
        RankedList("q1", (("d1", 0.9), ("d1", 0.8)))


def test_run_file_round_trip(tmp_path):
    runs = {
        "q1": RankedList("q1", (("d1", 0.9), ("d2", 0.8))),
        "q2": RankedList("q2", (("d3", 1.5),)),
    }
    path = tmp_path / "a.run"
    write_run(runs, path, tag="toolkit")
    back = read_run(path)
    assert set(back) == {"q1", "q2"}
    assert back["q1"].doc_ids() == ("d1", "d2")
    assert tuple(back["q1"].scores()) == (0.9, 0.8)
    assert len(back["q2"]) == 1


def test_run_file_score_order_violation_is_detected(tmp_path):
    path = tmp_path / "bad.run"
    path.write_text("q1 Q0 d1 1 0.8 t\nq1 Q0 d2 2 0.9 t\n")
    with pytest.raises(DataValidationError, match="order"):
        read_run(path)


def test_run_file_malformed_line_is_detected(tmp_path):
    path = tmp_path / "bad.run"
    path.write_text("q1 Q0 d1 1 0.8\n")
    with pytest.raises(DataValidationError):
        read_run(path)


def test_empty_run_file_yields_no_runs(tmp_path):
    path = tmp_path / "empty.run"
    path.write_text("")
    assert read_run(path) == {}


# --- qrels --------------------------------------------------------------------


def test_qrels_round_trip_and_grades(tmp_path):
    q = Qrels({("q1", "d1"): 1, ("q1", "d2"): 2, ("q2", "d1"): 0})
    path = tmp_path / "qrels.txt"
    write_qrels(q, path)
    back = read_qrels(path)
    assert back.grades == q.grades
    assert back.grades_for("q1") == {"d1": 1, "d2": 2}
    assert back.has_relevant("q1") and not back.has_relevant("q2")


def test_qrels_reject_negative_grades_and_duplicates(tmp_path):
    with pytest.raises(DataValidationError, match="negative"):
        Qrels({("q1", "d1"): -1})
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1 1\nq1 0 d1 2\n")
    with pytest.raises(DataValidationError, match="duplicate"):
        read_qrels(path)


def test_qrels_grade_two_is_accepted(tmp_path):
    path = tmp_path / "qrels.txt"
    path.write_text("q1 0 d1 2\n")
    assert read_qrels(path).grades[("q1", "d1")] == 2


# --- query text TSVs -----------------------------------------------------------


def test_query_texts_round_trip(tmp_path):
    texts = {"q1": "first query", "q2": "second one"}
    path = tmp_path / "queries.tsv"
    write_query_texts(texts, path, header_comment="note")
    assert read_query_texts(path) == texts
    assert path.read_text().startswith("# note\n")


def test_query_texts_reject_tabs_and_duplicates(tmp_path):
    path = tmp_path / "queries.tsv"
    with pytest.raises(DataValidationError):
        write_query_texts({"q1": "has\ttab"}, path)
    path.write_text("q1\ta\nq1\tb\n")
    with pytest.raises(DataValidationError, match="duplicate"):
        read_query_texts(path)


def test_id_list_round_trip(tmp_path):
    ids = ["d3", "d1", "d2"]
    path = tmp_path / "ids.txt"
    write_id_list(ids, path)
    assert read_id_list(path) == tuple(ids)


# --- effectiveness tables -------------------------------------------------------


def test_effectiveness_round_trip_and_lookup(tmp_path):
    table = EffectivenessTable(
        metric="ndcg@10",
        values={("m1", "d1"): 0.5, ("m2", "d1"): 0.25, ("m1", "d2"): 1.0},
    )
    path = tmp_path / "eff.csv"
    write_effectiveness(table, path)
    back = read_effectiveness(path)
    assert back.values == table.values
    assert back.value("m2", "d1") == 0.25
    assert back.column("d1") == {"m1": 0.5, "m2": 0.25}
    assert set(back.datasets()) == {"d1", "d2"}


def test_effectiveness_rejects_out_of_range_and_duplicates(tmp_path):
    with pytest.raises(DataValidationError):
        EffectivenessTable(metric="ndcg@10", values={("m", "d"): 1.5})
    path = tmp_path / "eff.csv"
    path.write_text("model,dataset,value\nm,d,0.5\nm,d,0.6\n")
    with pytest.raises(DataValidationError, match="duplicate"):
        read_effectiveness(path)


# --- model registry ----------------------------------------------------------


def test_registry_round_trip_and_order(tmp_path):
    reg = ModelRegistry(
        (
            ModelEntry("m1", "dot", "Model One"),
            ModelEntry("m2", "cosine", "Model Two"),
        )
    )
    path = tmp_path / "registry.json"
    write_registry(reg, path)
    back = read_registry(path)
    assert back.model_ids() == ("m1", "m2")
    assert back.similarity("m2") == "cosine"
    assert back.index("m2") == 1
    with pytest.raises(DataValidationError):
        back.entry("missing")


def test_registry_rejects_duplicates_and_bad_similarity():
    with pytest.raises(DataValidationError, match="duplicate"):
        ModelRegistry((ModelEntry("m", "dot"), ModelEntry("m", "dot")))
    with pytest.raises(DataValidationError):
        ModelEntry("m", "euclidean")
