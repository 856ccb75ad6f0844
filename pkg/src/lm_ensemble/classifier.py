"""A small two-layer feed-forward classifier trained from scratch in numpy.

The network is dense -> ReLU -> dense -> softmax, trained with mini-batch
gradient descent on weighted cross-entropy.  The batch loss is

    L = (1/B) * sum_{i in batch} weight_i * CE_i

with B the batch size, so per-example weights scale gradients linearly: a
uniform weight w rescales every update by exactly w.  All randomness
(initialization, one shuffle per epoch) comes from the package's counter
RNG, keyed by the config seed, so a training run is a pure function of
(features, labels, weights, config).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .data import LabeledDataset
from .rng import STREAM_INIT, STREAM_SHUFFLE_BASE, CounterRng


class TrainingDivergedError(RuntimeError):
    """Parameters became non-finite during training."""

    def __init__(self, epoch: int, batch: int, unit: str = "epoch"):
        self.epoch = epoch
        self.batch = batch
        self.unit = unit
        super().__init__(
            f"training diverged (non-finite parameters) at {unit} {epoch}, batch {batch}; "
            "reduce the learning rate or rescale the features"
        )


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 200
    batch_size: int = 32
    hidden_dim: int = 16
    weight_init_scale: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning_rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.hidden_dim < 1:
            raise ValueError("hidden_dim must be >= 1")
        if self.weight_init_scale <= 0.0:
            raise ValueError("weight_init_scale must be positive")


@dataclass
class SmallClassifier:
    """dense(W1, b1) -> ReLU -> dense(W2, b2) -> softmax."""

    w1: np.ndarray  # (hidden, in)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (classes, hidden)
    b2: np.ndarray  # (classes,)

    @property
    def input_dim(self) -> int:
        return self.w1.shape[1]

    @property
    def num_classes(self) -> int:
        return self.w2.shape[0]

    def copy(self) -> "SmallClassifier":
        return SmallClassifier(self.w1.copy(), self.b1.copy(), self.w2.copy(), self.b2.copy())


@dataclass(frozen=True)
class EpochStats:
    """Metrics over the full training set at the end of one epoch."""

    epoch: int
    train_ce: float
    zero_one: int


@dataclass(frozen=True)
class TrainResult:
    model: SmallClassifier
    trace: tuple = field(default_factory=tuple)

    @property
    def final_train_ce(self) -> float:
        return self.trace[-1].train_ce if self.trace else float("nan")


def init_classifier(input_dim: int, num_classes: int, config: TrainConfig) -> SmallClassifier:
    """Seeded uniform(-s/sqrt(fan_in), +s/sqrt(fan_in)) weights, zero biases."""
    if input_dim < 1 or num_classes < 1:
        raise ValueError("input_dim and num_classes must be positive")
    rng = CounterRng(config.seed, STREAM_INIT)
    h = config.hidden_dim
    lim1 = config.weight_init_scale / np.sqrt(input_dim)
    lim2 = config.weight_init_scale / np.sqrt(h)
    w1 = (rng.uniforms((h, input_dim)) * 2.0 - 1.0) * lim1
    w2 = (rng.uniforms((num_classes, h)) * 2.0 - 1.0) * lim2
    return SmallClassifier(w1=w1, b1=np.zeros(h), w2=w2, b2=np.zeros(num_classes))


def _forward(model: SmallClassifier, x: np.ndarray):
    z1 = x @ model.w1.T + model.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ model.w2.T + model.b2
    return a1, z2


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _cross_entropy(z: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-row -log softmax(z)[label], computed in shifted log space."""
    shifted = z - z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(shifted).sum(axis=1))
    return logsum - shifted[np.arange(z.shape[0]), labels]


def predict_proba(model: SmallClassifier, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 1:
        features = features[None, :]
    if features.shape[1] != model.input_dim:
        raise ValueError(f"expected {model.input_dim} features, got {features.shape[1]}")
    _, z2 = _forward(model, features)
    return _softmax(z2)


def predict_classifier(model: SmallClassifier, features: np.ndarray):
    """Returns (predicted classes, probability rows).

    Classes are the row-wise argmax of the softmax output; ties go to the
    lowest class index.
    """
    probs = predict_proba(model, features)
    return np.argmax(probs, axis=1).astype(np.int64), probs


def weighted_ce(model: SmallClassifier, features, labels, weights) -> float:
    """Mean over examples of weight_i * CE_i (the quantity training reports)."""
    _, z2 = _forward(model, features)
    ce = _cross_entropy(z2, labels)
    return float((weights * ce).sum() / features.shape[0])


def loss_and_grads(model: SmallClassifier, x: np.ndarray, y: np.ndarray, w: np.ndarray):
    """Batch loss mean(w_i * CE_i) and its gradients for every parameter.

    Returns ``(loss, {"w1": ..., "b1": ..., "w2": ..., "b2": ...})``.
    """
    B = x.shape[0]
    a1, z2 = _forward(model, x)
    p = _softmax(z2)
    ce = _cross_entropy(z2, y)
    scale = w / B
    dz2 = p
    dz2[np.arange(B), y] -= 1.0
    dz2 *= scale[:, None]
    gw2 = dz2.T @ a1
    gb2 = dz2.sum(axis=0)
    da1 = dz2 @ model.w2
    da1[a1 <= 0.0] = 0.0
    gw1 = da1.T @ x
    gb1 = da1.sum(axis=0)
    loss = float((w * ce).sum() / B)
    return loss, {"w1": gw1, "b1": gb1, "w2": gw2, "b2": gb2}


def _batch_step(model, x, y, w, learning_rate):
    """One gradient-descent update on a batch; returns the batch loss."""
    loss, grads = loss_and_grads(model, x, y, w)
    model.w1 -= learning_rate * grads["w1"]
    model.b1 -= learning_rate * grads["b1"]
    model.w2 -= learning_rate * grads["w2"]
    model.b2 -= learning_rate * grads["b2"]
    return loss


def epoch_shuffle_order(seed: int, epoch: int, m: int) -> np.ndarray:
    """The visiting order of examples in the given epoch (seeded per epoch)."""
    return CounterRng(seed, STREAM_SHUFFLE_BASE + epoch).permutation(m)


def run_epoch(
    model: SmallClassifier,
    features: np.ndarray,
    labels: np.ndarray,
    weights: np.ndarray,
    config: TrainConfig,
    epoch: int,
) -> None:
    """Shuffle, then update on consecutive batches (the last may be short)."""
    m = features.shape[0]
    order = epoch_shuffle_order(config.seed, epoch, m)
    for batch_idx, start in enumerate(range(0, m, config.batch_size)):
        take = order[start : start + config.batch_size]
        # overflow in a diverging run is detected below and raised as a
        # structured error, so numpy's own warnings are just noise
        with np.errstate(over="ignore", invalid="ignore"):
            _batch_step(model, features[take], labels[take], weights[take], config.learning_rate)
        params = (model.w1, model.b1, model.w2, model.b2)
        if not all(np.all(np.isfinite(p)) for p in params):
            raise TrainingDivergedError(epoch, batch_idx)


def train_classifier(
    features: np.ndarray,
    labels: LabeledDataset,
    config: TrainConfig,
    per_example_weights: Optional[np.ndarray] = None,
) -> TrainResult:
    """Train from a seeded initialization; deterministic for fixed arguments."""
    features = np.asarray(features, dtype=np.float64)
    num_classes = labels.num_classes
    labels = np.asarray(labels.labels, dtype=np.int64)
    m = features.shape[0]
    if labels.shape[0] != m:
        raise ValueError("features and labels differ in length")
    if per_example_weights is None:
        weights = np.ones(m, dtype=np.float64)
    else:
        weights = np.asarray(per_example_weights, dtype=np.float64)
        if weights.shape != (m,):
            raise ValueError("per-example weights must be one scalar per example")
        if not np.all(np.isfinite(weights)) or np.any(weights < 0.0):
            raise ValueError("per-example weights must be finite and non-negative")
    model = init_classifier(features.shape[1], num_classes, config)
    trace = []
    for epoch in range(config.epochs):
        run_epoch(model, features, labels, weights, config, epoch)
        ce = weighted_ce(model, features, labels, weights)
        preds, _ = predict_classifier(model, features)
        miss = int(np.count_nonzero(preds != labels))
        trace.append(EpochStats(epoch=epoch, train_ce=ce, zero_one=miss))
    return TrainResult(model=model, trace=tuple(trace))


# ---------------------------------------------------------------------------
# serialization


def classifier_to_dict(model: SmallClassifier) -> dict:
    return {
        "w1": model.w1.tolist(),
        "b1": model.b1.tolist(),
        "w2": model.w2.tolist(),
        "b2": model.b2.tolist(),
    }


def classifier_from_dict(doc: dict) -> SmallClassifier:
    try:
        w1 = np.asarray(doc["w1"], dtype=np.float64)
        b1 = np.asarray(doc["b1"], dtype=np.float64)
        w2 = np.asarray(doc["w2"], dtype=np.float64)
        b2 = np.asarray(doc["b2"], dtype=np.float64)
    except (KeyError, TypeError, ValueError) as e:
        raise ValueError(f"malformed classifier document: {e}")
    if (
        w1.ndim != 2
        or b1.shape != (w1.shape[0],)
        or w2.ndim != 2
        or w2.shape[1] != w1.shape[0]
        or b2.shape != (w2.shape[0],)
    ):
        raise ValueError("classifier parameter shapes are inconsistent")
    return SmallClassifier(w1=w1, b1=b1, w2=w2, b2=b2)


def save_classifier(model: SmallClassifier, path) -> None:
    Path(path).write_text(
        json.dumps(classifier_to_dict(model), sort_keys=True) + "\n", encoding="utf-8"
    )


def load_classifier(path) -> SmallClassifier:
    return classifier_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
