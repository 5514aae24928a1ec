"""Toolkit for picking a dense retrieval model for an unlabeled corpus.

Given per-model query/document embeddings of a target corpus, the selectors
rank a pool of models by proxy criteria (source-domain effectiveness, query
similarity, corpus-level and retrieval-level Frechet distances, score-entropy
and query-perturbation sensitivity) without needing relevance judgments.
The metaeval module then scores those predicted rankings against ground-truth
effectiveness where judgments do exist.
"""

from drselect.errors import ConfigError, DataValidationError, NumericError

__version__ = "0.1.0"

__all__ = ["ConfigError", "DataValidationError", "NumericError", "__version__"]
