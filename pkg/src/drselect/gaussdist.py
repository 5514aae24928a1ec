"""Gaussian summaries of embedding sets and the Fréchet distance between them.

FD(a, b) = ||mu_a - mu_b||^2 + Tr(S_a) + Tr(S_b) - 2 Tr((S_a S_b)^(1/2))

The matrix square root is evaluated through symmetric eigendecompositions:
with S_a = U diag(w) U^T and Q = sqrt(S_a), Tr((S_a S_b)^(1/2)) equals
Tr((Q S_b Q)^(1/2)) because Q S_b Q is similar to S_a S_b. Q S_b Q is
symmetric PSD, so its eigenvalues are real and the trace of its square root
is the sum of their square roots. Small negative eigenvalues from roundoff
are clipped to zero.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from drselect.corpusio import EmbeddingMatrix
from drselect.errors import DataValidationError, NumericError

RIDGE_EPS = 1e-6


@dataclass(frozen=True)
class GaussianSummary:
    """Mean vector, covariance matrix (n-1 denominator) and sample count."""

    mean: np.ndarray
    cov: np.ndarray
    count: int

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64)
        cov = np.asarray(self.cov, dtype=np.float64)
        if mean.ndim != 1:
            raise DataValidationError("mean must be a vector")
        if cov.shape != (mean.shape[0], mean.shape[0]):
            raise DataValidationError(
                f"covariance shape {cov.shape} does not match dim {mean.shape[0]}"
            )
        if not (np.isfinite(mean).all() and np.isfinite(cov).all()):
            raise DataValidationError("non-finite value in Gaussian summary")
        cov = (cov + cov.T) / 2.0  # enforce exact symmetry against roundoff
        mean.setflags(write=False)
        cov.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)
        object.__setattr__(self, "count", int(self.count))

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])

    def with_ridge(self, eps: float = RIDGE_EPS) -> "GaussianSummary":
        """Covariance regularized by eps * I (used for small samples)."""
        return GaussianSummary(
            self.mean, self.cov + eps * np.eye(self.dim), self.count
        )


def summarize(rows) -> GaussianSummary:
    """Gaussian summary of an embedding set (matrix or raw n x d array)."""
    if isinstance(rows, EmbeddingMatrix):
        rows = rows.rows64()
    arr = np.asarray(rows, dtype=np.float64)
    if arr.ndim != 2:
        raise DataValidationError("summarize expects an n x d array")
    n = arr.shape[0]
    if n < 2:
        raise DataValidationError("need at least two rows for a covariance")
    if not np.isfinite(arr).all():
        raise DataValidationError("non-finite value in rows")
    mean = arr.mean(axis=0)
    centered = arr - mean
    cov = centered.T @ centered / (n - 1)
    return GaussianSummary(mean, cov, n)


def _sym_eig(cov: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    try:
        w, u = np.linalg.eigh(cov)
    except np.linalg.LinAlgError as exc:
        raise NumericError(f"eigendecomposition failed: {exc}") from None
    return np.clip(w, 0.0, None), u


def trace_sqrt_product(cov_a: np.ndarray, cov_b: np.ndarray) -> float:
    """Tr((cov_a cov_b)^(1/2)) for symmetric PSD inputs."""
    cov_a = np.asarray(cov_a, dtype=np.float64)
    cov_b = np.asarray(cov_b, dtype=np.float64)
    if cov_a.shape != cov_b.shape or cov_a.ndim != 2 or cov_a.shape[0] != cov_a.shape[1]:
        raise DataValidationError("covariance shapes must be equal and square")
    w_a, u_a = _sym_eig((cov_a + cov_a.T) / 2.0)
    sqrt_a = (u_a * np.sqrt(w_a)) @ u_a.T
    inner = sqrt_a @ ((cov_b + cov_b.T) / 2.0) @ sqrt_a
    w_inner, _ = _sym_eig((inner + inner.T) / 2.0)
    return float(np.sqrt(w_inner).sum())


def frechet_distance(a: GaussianSummary, b: GaussianSummary) -> float:
    """Fréchet distance between two Gaussian summaries, clamped at zero."""
    if a.dim != b.dim:
        raise DataValidationError(f"dimension mismatch: {a.dim} vs {b.dim}")
    delta = a.mean - b.mean
    value = (
        float(delta @ delta)
        + float(np.trace(a.cov))
        + float(np.trace(b.cov))
        - 2.0 * trace_sqrt_product(a.cov, b.cov)
    )
    if not np.isfinite(value):
        raise NumericError("Fréchet distance is not finite")
    return max(value, 0.0)
