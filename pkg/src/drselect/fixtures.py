"""Bundled reference data: a published effectiveness snapshot.

The package ships nDCG@10 values for eleven public dense retrievers trained
on MS MARCO, measured on ten BEIR test collections plus the MS MARCO dev
source split. The snapshot drives the regression tests of the
meta-evaluation arithmetic and doubles as a demo input for the in-domain
selector; registry order is the canonical tie-break order for this pool.
"""

from __future__ import annotations

from importlib import resources

from drselect.corpusio import (
    EffectivenessTable,
    ModelRegistry,
    read_effectiveness,
    read_registry,
)

SOURCE_DATASET = "msmarco"

BEIR_DATASETS = (
    "trec-covid",
    "nfcorpus",
    "nq",
    "hotpotqa",
    "fiqa",
    "arguana",
    "dbpedia-entity",
    "scidocs",
    "scifact",
    "quora",
)


def _data_path(name: str):
    return resources.files("drselect.data") / name


def beir_effectiveness() -> EffectivenessTable:
    """nDCG@10 snapshot: 11 models x (10 BEIR datasets + msmarco source)."""
    with resources.as_file(_data_path("beir_ndcg10.csv")) as path:
        return read_effectiveness(path)


def beir_registry() -> ModelRegistry:
    """The eleven-model pool in canonical (tie-break) order."""
    with resources.as_file(_data_path("model_pool.json")) as path:
        return read_registry(path)
