"""Shared test helper for building embedding matrices tersely."""

import numpy as np

from drselect.corpusio import EmbeddingMatrix


def make_matrix(ids, rows, model_id="m", role="doc") -> EmbeddingMatrix:
    return EmbeddingMatrix(
        ids=tuple(ids),
        rows=np.asarray(rows, dtype=np.float32),
        model_id=model_id,
        role=role,
    )
