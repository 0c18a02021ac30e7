"""Deterministic PCA projection for external scatter plotting.

Covariance eigendecomposition of mean-centered data; components are ordered
by descending eigenvalue and sign-fixed so each component's first nonzero
loading is positive, making the output reproducible across runs.
"""

from __future__ import annotations

import numpy as np

from .core import EmbeddingSet
from .errors import InsufficientDataError, InvalidSpecError


def pca_project(embeddings: EmbeddingSet, components: int = 2):
    """(coords, degenerate): per-record projection onto the top components.

    ``coords`` is (n, components) float64. Constant input has no principal
    directions; every coordinate is 0 and ``degenerate`` is True.
    """
    n = len(embeddings)
    if n < 2:
        raise InsufficientDataError(f"pca needs >= 2 records, got {n}")
    if not 1 <= components <= embeddings.dim:
        raise InvalidSpecError(
            f"components must lie in [1, dim={embeddings.dim}], got {components}"
        )
    x = embeddings.vectors.astype(np.float64)
    centered = x - x.mean(axis=0)
    if not np.any(centered):
        return np.zeros((n, components)), True
    cov = (centered.T @ centered) / (n - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    order = np.argsort(eigvals)[::-1][:components]
    basis = eigvecs[:, order].copy()
    for c in range(basis.shape[1]):
        nonzero = np.nonzero(np.abs(basis[:, c]) > 1e-12)[0]
        if nonzero.size and basis[nonzero[0], c] < 0:
            basis[:, c] = -basis[:, c]
    return centered @ basis, False
