"""Checkpoint container and the deterministic toy encoder.

A checkpoint bundles a vocabulary, a shared token-embedding table, and one
affine projection per role (query vs document), the classic bi-encoder split.
Weights are drawn once from a seeded generator when the checkpoint is created
and never change afterwards, so encoding is a pure function of (checkpoint,
role, text).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from encoder_bridge.errors import CheckpointError, InputError
from encoder_bridge.vocab import Vocabulary

ROLES = ("query", "doc")
POOLINGS = ("mean", "cls")
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Checkpoint:
    model_id: str
    vocab: Vocabulary
    token_embeddings: np.ndarray  # (vocab, dim) float64
    projections: dict[str, np.ndarray]  # role -> (dim, dim)
    biases: dict[str, np.ndarray]  # role -> (dim,)
    pooling: str

    @property
    def dim(self) -> int:
        return int(self.token_embeddings.shape[1])

    def __post_init__(self):
        if self.pooling not in POOLINGS:
            raise CheckpointError(f"unknown pooling {self.pooling!r}")
        if self.token_embeddings.shape[0] != len(self.vocab):
            raise CheckpointError(
                f"embedding table has {self.token_embeddings.shape[0]} rows "
                f"for {len(self.vocab)} vocabulary entries"
            )
        for role in ROLES:
            if role not in self.projections or role not in self.biases:
                raise CheckpointError(f"checkpoint missing weights for role {role!r}")
            if self.projections[role].shape != (self.dim, self.dim):
                raise CheckpointError(f"{role} projection shape mismatch")
            if self.biases[role].shape != (self.dim,):
                raise CheckpointError(f"{role} bias shape mismatch")


def make_checkpoint(
    model_id: str,
    vocab: Vocabulary,
    dim: int = 32,
    seed: int = 0,
    pooling: str = "mean",
) -> Checkpoint:
    """Fresh random weights, fully determined by the arguments."""
    if dim <= 0:
        raise CheckpointError("dim must be positive")
    rng = np.random.default_rng(seed)
    scale = 1.0 / np.sqrt(dim)
    table = rng.normal(0.0, 1.0, size=(len(vocab), dim))
    projections = {}
    biases = {}
    for role in ROLES:
        projections[role] = rng.normal(0.0, scale, size=(dim, dim))
        biases[role] = rng.normal(0.0, scale, size=dim)
    return Checkpoint(model_id, vocab, table, projections, biases, pooling)


def save_checkpoint(ckpt: Checkpoint, path: str | Path) -> None:
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "wb") as fh:  # a file object keeps np.savez from renaming
        np.savez(
            fh,
            format_version=np.int64(FORMAT_VERSION),
            model_id=np.str_(ckpt.model_id),
            pooling=np.str_(ckpt.pooling),
            vocab=np.str_("\n".join(ckpt.vocab.tokens)),
            token_embeddings=ckpt.token_embeddings,
            query_projection=ckpt.projections["query"],
            query_bias=ckpt.biases["query"],
            doc_projection=ckpt.projections["doc"],
            doc_bias=ckpt.biases["doc"],
        )
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> Checkpoint:
    path = Path(path)
    if not path.exists():
        raise CheckpointError(f"checkpoint not found: {path}")
    try:
        with np.load(path) as data:
            version = int(data["format_version"])
            if version != FORMAT_VERSION:
                raise CheckpointError(f"unsupported checkpoint version {version}")
            vocab = Vocabulary(str(data["vocab"]).split("\n"))
            return Checkpoint(
                model_id=str(data["model_id"]),
                vocab=vocab,
                token_embeddings=np.asarray(data["token_embeddings"], dtype=np.float64),
                projections={
                    "query": np.asarray(data["query_projection"], dtype=np.float64),
                    "doc": np.asarray(data["doc_projection"], dtype=np.float64),
                },
                biases={
                    "query": np.asarray(data["query_bias"], dtype=np.float64),
                    "doc": np.asarray(data["doc_bias"], dtype=np.float64),
                },
                pooling=str(data["pooling"]),
            )
    except KeyError as exc:
        raise CheckpointError(f"checkpoint {path} is missing field {exc}") from None
    except (ValueError, OSError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None


class Encoder:
    """Encodes texts for one role of a loaded checkpoint."""

    def __init__(self, ckpt: Checkpoint, role: str):
        if role not in ROLES:
            raise CheckpointError(f"unknown role {role!r}; expected one of {ROLES}")
        self._ckpt = ckpt
        self._proj = ckpt.projections[role]
        self._bias = ckpt.biases[role]
        self.role = role

    def encode_one(self, text: str) -> np.ndarray:
        """Embedding for a single text, float32 of the checkpoint dimension."""
        ids = self._ckpt.vocab.encode(text)
        if not ids:
            raise InputError("cannot encode an empty text")
        rows = self._ckpt.token_embeddings[ids]
        pooled = rows[0] if self._ckpt.pooling == "cls" else rows.mean(axis=0)
        hidden = np.tanh(pooled @ self._proj + self._bias)
        return hidden.astype(np.float32)

    def encode(self, texts: list[str]) -> np.ndarray:
        """Stack of per-text embeddings; row order follows the input order.

        Each row is computed independently, so the result does not depend on
        how callers batch their inputs.
        """
        if not texts:
            raise InputError("cannot encode an empty batch")
        return np.stack([self.encode_one(t) for t in texts])
