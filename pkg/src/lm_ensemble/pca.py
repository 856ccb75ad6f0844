"""Principal-component projection used to compress concatenated embeddings.

Fitting is a thin wrapper around the SVD of the centered data matrix; the
projector is a plain dataclass so it can be serialized alongside a trained
classifier and reapplied to new rows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PCAProjector:
    """Affine map x -> (x - mean) @ components onto the top principal axes.

    ``components`` has shape (d, r) with orthonormal columns ordered by
    decreasing explained variance; ``explained_variance`` holds the matching
    sample variances (denominator m - 1).
    """

    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray

    def __post_init__(self):
        for name in ("mean", "components", "explained_variance"):
            a = np.ascontiguousarray(np.asarray(getattr(self, name), dtype=np.float64))
            a.flags.writeable = False
            object.__setattr__(self, name, a)

    @property
    def input_dim(self) -> int:
        return self.components.shape[0]

    @property
    def output_dim(self) -> int:
        return self.components.shape[1]

    def project(self, rows: np.ndarray) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        single = rows.ndim == 1
        if single:
            rows = rows[None, :]
        if rows.shape[1] != self.input_dim:
            raise ValueError(f"expected {self.input_dim} features, got {rows.shape[1]}")
        out = (rows - self.mean) @ self.components
        return out[0] if single else out


def fit_pca(rows: np.ndarray, num_components: int) -> PCAProjector:
    """Fit a projector onto the top ``num_components`` principal axes.

    The sign of each component is fixed by making its largest-magnitude
    entry positive (first occurrence on magnitude ties), so the fit is a
    pure function of the data.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("expected a 2-D data matrix")
    m, d = X.shape
    if m < 2:
        raise ValueError("need at least 2 rows to fit")
    max_rank = min(m, d)
    if not (1 <= num_components <= max_rank):
        raise ValueError(f"num_components must be in [1, {max_rank}], got {num_components}")
    mean = X.mean(axis=0)
    centered = X - mean
    # full_matrices=False yields min(m, d) right singular vectors; centering
    # drops the data rank to at most m - 1, so trailing components just span
    # a deterministic zero-variance complement
    _, s, vt = np.linalg.svd(centered, full_matrices=False)
    comps = vt[:num_components].T.copy()  # (d, r)
    for j in range(comps.shape[1]):
        k = int(np.argmax(np.abs(comps[:, j])))
        if comps[k, j] < 0:
            comps[:, j] = -comps[:, j]
    variance = (s[:num_components] ** 2) / (m - 1)
    return PCAProjector(mean=mean, components=comps, explained_variance=variance)
