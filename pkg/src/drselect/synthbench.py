"""Deterministic synthetic mini-benchmark for exercising the full pipeline.

Fabricates a small retrieval world: documents and queries live in a shared
latent topic space, and each fabricated "model" is a random linear encoder
of that space plus per-model noise. More encoder noise means worse retrieval
of the latent-relevant documents, which plants a known effectiveness
ordering without any real training. Perturbed-query embeddings are the
original vectors plus noise scaling with the mask proportion and a per-model
sensitivity, standing in for re-encoding the masked texts.

Everything is derived from one seed, so regenerating the benchmark writes a
byte-identical tree.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from drselect.corpusio import (
    EmbeddingMatrix,
    Qrels,
    write_embeddings,
    write_id_list,
    write_qrels,
    write_query_texts,
)
from drselect.perturb import perturbed_id
from drselect.seeding import derive_rng

LATENT_DIM = 16
TOPICS = 6
GRADE2_DOCS = 3  # latent-nearest same-topic docs per query
GRADE1_DOCS = 7

_WORDS = (
    "amber", "basalt", "cobalt", "dune", "ember", "fjord", "garnet", "heath",
    "iris", "juniper", "krill", "lichen", "mesa", "nectar", "onyx", "pumice",
    "quartz", "reef", "sepia", "tundra", "umber", "vale", "wren", "xenon",
    "yarrow", "zephyr",
)


@dataclass(frozen=True)
class SynthModel:
    model_id: str
    similarity: str
    dim: int
    encoder_noise: float  # corrupts every embedding; drives effectiveness down
    perturb_gain: float  # scales the perturbed-query drift
    row_scale: float = 1.0  # keeps dot-product models off the unit sphere


MODELS = (
    SynthModel("unit-a", "cosine", 32, 0.05, 0.3),
    SynthModel("unit-b", "dot", 48, 0.25, 1.0, row_scale=3.0),
    SynthModel("unit-c", "cosine", 24, 0.60, 2.0),
)


@dataclass(frozen=True)
class SynthDataset:
    name: str
    n_docs: int
    n_queries: int
    domain_shift: float  # latent offset magnitude relative to the source


DATASETS = (
    SynthDataset("srcland", 1200, 12, 0.0),
    SynthDataset("tgt-alpha", 1250, 9, 0.6),
    SynthDataset("tgt-beta", 1300, 10, 1.2),
)

PERTURB_PS = (0.1, 0.2, 0.3)
PERTURB_TRIALS = 3


def _topic_centers(seed: int, ds: SynthDataset) -> np.ndarray:
    rng = derive_rng(seed, "topics", ds.name)
    centers = rng.normal(size=(TOPICS, LATENT_DIM))
    shift = derive_rng(seed, "shift", ds.name).normal(size=LATENT_DIM)
    return centers + ds.domain_shift * shift


def _doc_latents(seed: int, ds: SynthDataset, centers: np.ndarray) -> np.ndarray:
    rng = derive_rng(seed, "docs", ds.name)
    topics = np.arange(ds.n_docs) % TOPICS
    return centers[topics] + 0.5 * rng.normal(size=(ds.n_docs, LATENT_DIM))


def _query_latents(seed: int, ds: SynthDataset, centers: np.ndarray) -> np.ndarray:
    rng = derive_rng(seed, "queries", ds.name)
    topics = np.arange(ds.n_queries) % TOPICS
    return centers[topics] + 0.2 * rng.normal(size=(ds.n_queries, LATENT_DIM))


def _doc_ids(ds: SynthDataset) -> list[str]:
    return [f"{ds.name}-d{i:05d}" for i in range(ds.n_docs)]


def _query_ids(ds: SynthDataset) -> list[str]:
    return [f"{ds.name}-q{i:03d}" for i in range(ds.n_queries)]


def _query_texts(seed: int, ds: SynthDataset) -> dict[str, str]:
    rng = derive_rng(seed, "texts", ds.name)
    out = {}
    for qid in _query_ids(ds):
        n_tokens = int(rng.integers(6, 13))
        words = rng.choice(len(_WORDS), size=n_tokens, replace=True)
        out[qid] = " ".join(_WORDS[w] for w in words)
    return out


def _qrels(ds: SynthDataset, doc_latents: np.ndarray, query_latents: np.ndarray) -> Qrels:
    """Grade the latent-nearest same-topic docs: a few 2s, then 1s."""
    doc_ids = _doc_ids(ds)
    doc_topics = np.arange(ds.n_docs) % TOPICS
    grades: dict[tuple[str, str], int] = {}
    for qi, qid in enumerate(_query_ids(ds)):
        topic = qi % TOPICS
        members = np.flatnonzero(doc_topics == topic)
        sims = doc_latents[members] @ query_latents[qi]
        order = members[np.argsort(-sims, kind="stable")]
        for rank, di in enumerate(order[: GRADE2_DOCS + GRADE1_DOCS]):
            grades[(qid, doc_ids[di])] = 2 if rank < GRADE2_DOCS else 1
    return Qrels(grades)


def _encode(
    seed: int, model: SynthModel, ds: SynthDataset, role: str,
    ids: list[str], latents: np.ndarray,
) -> EmbeddingMatrix:
    projection = derive_rng(seed, "proj", model.model_id).normal(
        size=(LATENT_DIM, model.dim)
    ) / np.sqrt(LATENT_DIM)
    noise = derive_rng(seed, "emb", model.model_id, ds.name, role).normal(
        size=(len(ids), model.dim)
    )
    rows = model.row_scale * (latents @ projection + model.encoder_noise * noise)
    return EmbeddingMatrix(model.model_id, role, ids, rows)


def _perturbed_queries(
    seed: int, model: SynthModel, ds: SynthDataset, p: float,
    base: EmbeddingMatrix,
) -> EmbeddingMatrix:
    ids = []
    rows = []
    for qi, qid in enumerate(base.ids):
        for trial in range(1, PERTURB_TRIALS + 1):
            pid = perturbed_id(qid, trial)
            drift = derive_rng(
                seed, "perturb-emb", model.model_id, ds.name, pid, repr(p)
            ).normal(size=base.dim)
            ids.append(pid)
            rows.append(base.rows64()[qi] + p * model.perturb_gain * drift)
    return EmbeddingMatrix(model.model_id, "query", ids, np.asarray(rows))


def _dataset_config(ds: SynthDataset) -> dict:
    emb = {}
    for model in MODELS:
        entry = {
            "queries": f"{ds.name}/emb/{model.model_id}.queries.emb",
            "docs": f"{ds.name}/emb/{model.model_id}.docs.emb",
        }
        if ds.domain_shift > 0:  # targets carry perturbed-query embeddings
            entry["perturbed"] = {
                repr(p): f"{ds.name}/emb/{model.model_id}.queries.p{p}.emb"
                for p in PERTURB_PS
            }
        emb[model.model_id] = entry
    return {
        "name": ds.name,
        "queries": f"{ds.name}/queries.tsv",
        "qrels": f"{ds.name}/qrels.txt",
        "doc_ids": f"{ds.name}/docids.txt",
        "embeddings": emb,
    }


def generate(out_dir: str | Path, seed: int = 7) -> Path:
    """Write the benchmark tree plus its pipeline config; returns config path."""
    out = Path(out_dir)
    source, *targets = DATASETS
    for ds in DATASETS:
        ds_dir = out / ds.name
        (ds_dir / "emb").mkdir(parents=True, exist_ok=True)
        centers = _topic_centers(seed, ds)
        doc_latents = _doc_latents(seed, ds, centers)
        query_latents = _query_latents(seed, ds, centers)
        doc_ids = _doc_ids(ds)
        query_ids = _query_ids(ds)

        write_query_texts(_query_texts(seed, ds), ds_dir / "queries.tsv")
        write_id_list(doc_ids, ds_dir / "docids.txt")
        write_qrels(_qrels(ds, doc_latents, query_latents), ds_dir / "qrels.txt")

        for model in MODELS:
            docs = _encode(seed, model, ds, "doc", doc_ids, doc_latents)
            queries = _encode(seed, model, ds, "query", query_ids, query_latents)
            write_embeddings(docs, ds_dir / "emb" / f"{model.model_id}.docs.emb")
            write_embeddings(queries, ds_dir / "emb" / f"{model.model_id}.queries.emb")
            if ds.domain_shift > 0:
                for p in PERTURB_PS:
                    perturbed = _perturbed_queries(seed, model, ds, p, queries)
                    write_embeddings(
                        perturbed,
                        ds_dir / "emb" / f"{model.model_id}.queries.p{p}.emb",
                    )

    config = {
        "seed": seed,
        "out_dir": "out",
        "registry": [
            {
                "model_id": m.model_id,
                "similarity": m.similarity,
                "display_name": m.model_id.replace("unit-", "Unit ").upper(),
            }
            for m in MODELS
        ],
        "source": _dataset_config(source),
        "targets": [_dataset_config(ds) for ds in targets],
        "retrieval": {"depth": 1000},
        "source_sample": {"docs": 10000, "queries": 1000},
        "methods": {
            "indomain": {},
            "qsim": {},
            "fd_corpus": {},
            "fd_extracted": {"k": 100},
            "entropy": {"cutoffs": [10, 1000], "negatives": 100},
            "qalter": {"p_values": list(PERTURB_PS), "trials": PERTURB_TRIALS, "k": 10},
        },
    }
    config_path = out / "config.json"
    config_path.write_bytes((json.dumps(config, indent=2) + "\n").encode("utf-8"))
    return config_path
