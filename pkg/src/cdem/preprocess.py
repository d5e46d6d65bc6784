"""Dimensionality reduction and row normalization applied before adaptation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateDataError


@dataclass(frozen=True)
class PcaModel:
    """Linear projector onto the leading principal directions.

    mean : (d,) column means of the fitting data
    basis : (d, m) orthonormal columns, ordered by decreasing variance
    explained_variance : (m,) sample variances along each basis column
    """

    mean: np.ndarray
    basis: np.ndarray
    explained_variance: np.ndarray

    @property
    def n_components(self) -> int:
        return self.basis.shape[1]


def fit_pca(features: np.ndarray, n_components: int) -> PcaModel:
    """Fit a PCA basis with a deterministic sign convention.

    Each basis column is flipped so that its largest-magnitude entry is
    positive, which makes the result a pure function of the input bytes.
    """
    x = np.asarray(features, dtype=np.float64)
    n, d = x.shape
    if n_components < 1 or n_components > min(n, d):
        raise ConfigError(
            f"n_components={n_components} not in [1, min(n={n}, d={d})]"
        )
    mean = x.mean(axis=0)
    centered = x - mean
    _, singular, vt = np.linalg.svd(centered, full_matrices=False)
    if singular[0] <= 0.0:
        raise DegenerateDataError("all samples identical: no variance to project")
    basis = vt[:n_components].T.copy()
    for j in range(basis.shape[1]):
        pivot = int(np.argmax(np.abs(basis[:, j])))
        if basis[pivot, j] < 0:
            basis[:, j] = -basis[:, j]
    variance = (singular[:n_components] ** 2) / max(n - 1, 1)
    return PcaModel(mean=mean, basis=basis, explained_variance=variance)


def transform(model: PcaModel, features: np.ndarray) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.mean.shape[0]:
        raise ConfigError(
            f"expected shape (n, {model.mean.shape[0]}), got {x.shape}"
        )
    return (x - model.mean) @ model.basis


def normalize_rows(features: np.ndarray) -> np.ndarray:
    """Scale every row to unit Euclidean length."""
    x = np.asarray(features, dtype=np.float64)
    norms = np.linalg.norm(x, axis=1)
    if (norms == 0.0).any():
        row = int(np.flatnonzero(norms == 0.0)[0])
        raise DegenerateDataError(f"row {row} has zero norm, cannot normalize")
    return x / norms[:, None]
