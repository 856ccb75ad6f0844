"""Semi ensembling: concatenate member embeddings and train a classifier.

The pipeline is: per-model sentence embeddings, concatenated column-wise in
manifest model order, an optional principal-component projection, then the
small feed-forward classifier.  With a single model and no projection the
features are exactly that model's embedding rows.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifier import (
    SmallClassifier,
    TrainConfig,
    predict_classifier,
    train_classifier,
)
from .data import EnsembleInput, concat_embeddings
from .pca import PCAProjector, fit_pca


@dataclass(frozen=True)
class SemiResult:
    model: SmallClassifier
    projector: Optional[PCAProjector]
    predictions: np.ndarray
    loss: int
    accuracy: float
    trace: tuple

    @property
    def epochs_run(self) -> int:
        return len(self.trace)

    @property
    def final_train_ce(self) -> float:
        return self.trace[-1].train_ce if self.trace else float("nan")


def build_features(inp: EnsembleInput, pca_dim: Optional[int] = None):
    """Concatenated embeddings, optionally compressed; returns (features, projector)."""
    feats = concat_embeddings(inp)
    if pca_dim is None:
        return feats, None
    projector = fit_pca(feats, pca_dim)
    return projector.project(feats), projector


def run_semi(inp: EnsembleInput, config: TrainConfig, pca_dim: Optional[int] = None) -> SemiResult:
    """Train the embedding classifier and score it on the training examples."""
    feats, projector = build_features(inp, pca_dim)
    ds = inp.dataset
    result = train_classifier(feats, ds, config)
    preds, _ = predict_classifier(result.model, feats)
    loss = int(np.count_nonzero(preds != ds.labels))
    return SemiResult(
        model=result.model,
        projector=projector,
        predictions=preds,
        loss=loss,
        accuracy=1.0 - loss / ds.num_examples,
        trace=result.trace,
    )
