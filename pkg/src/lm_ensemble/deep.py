"""Deep ensembling: knowledge-similarity rewards steering classifier training.

Each example carries two knowledge embeddings (an encyclopedic one and a
commonsense one).  A mixing coefficient beta in [0,1] blends the example's
cosine similarity to each, rescaled from [-1,1] to [0,1], into a per-example
weight w_i; the reward of a prediction set is the total weight over the
correctly predicted examples.  Training alternates rounds of: predict,
pick beta by grid search (smallest maximizer), recompute w, then run one
gradient-descent epoch whose per-example loss is CE_i * (1 + lambda * g_i)
with g_i = 1 - w_i when example i is currently predicted correctly and
g_i = w_i when it is not.  With lambda = 0 the loop is plain classifier
training.

Model embeddings are compared with knowledge embeddings after a principal-
component projection to the knowledge dimension (zero-padding first when the
concatenation is narrower).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .classifier import (
    SmallClassifier,
    TrainConfig,
    TrainingDivergedError,
    init_classifier,
    predict_classifier,
    run_epoch,
    weighted_ce,
)
from .data import EnsembleInput, KnowledgePair, concat_embeddings
from .pca import PCAProjector, fit_pca
from .semi import build_features


@dataclass(frozen=True)
class Beta:
    """Mixing coefficient between the two knowledge sources."""

    value: float

    def __post_init__(self):
        v = float(self.value)
        if not (0.0 <= v <= 1.0) or v != v:
            raise ValueError(f"beta must lie in [0, 1], got {self.value!r}")
        object.__setattr__(self, "value", v)


@dataclass(frozen=True)
class RewardWeights:
    """Per-example knowledge weights, each in [0, 1]."""

    w: np.ndarray

    def __post_init__(self):
        w = np.ascontiguousarray(np.asarray(self.w, dtype=np.float64))
        if w.ndim != 1:
            raise ValueError("weights must be a 1-D vector")
        if not np.all(np.isfinite(w)) or np.any(w < 0.0) or np.any(w > 1.0):
            raise ValueError("weights must lie in [0, 1]")
        w.flags.writeable = False
        object.__setattr__(self, "w", w)


@dataclass(frozen=True)
class DeepTrainConfig:
    """Classifier config plus the reward loop's knobs.

    ``rounds`` is the number of (beta search -> one epoch) alternations and
    defaults to ``base.epochs`` so that a disabled compensator retraces the
    plain pipeline epoch for epoch.
    """

    base: TrainConfig
    beta_grid_step: float = 0.01
    rl_weight: float = 1.0
    rounds: Optional[int] = None

    def __post_init__(self):
        _grid_count(self.beta_grid_step)  # validates
        if self.rl_weight < 0.0 or not np.isfinite(self.rl_weight):
            raise ValueError("rl_weight must be finite and non-negative")
        if self.rounds is None:
            object.__setattr__(self, "rounds", self.base.epochs)
        if self.rounds < 1:
            raise ValueError("rounds must be >= 1")


@dataclass(frozen=True)
class RoundStats:
    """One alternation: the beta/reward used and end-of-round training metrics."""

    round: int
    beta: float
    reward: float
    train_ce: float
    zero_one: int


@dataclass(frozen=True)
class DeepResult:
    model: SmallClassifier
    feature_projector: Optional[PCAProjector]
    alignment: PCAProjector
    beta: Beta
    reward: float
    weights: RewardWeights
    predictions: np.ndarray
    loss: int
    accuracy: float
    trace: tuple

    @property
    def rounds(self) -> int:
        return len(self.trace)


def _grid_count(step: float) -> int:
    if not (0.0 < step <= 1.0) or not np.isfinite(step):
        raise ValueError("grid step must lie in (0, 1]")
    n = round(1.0 / step)
    if n < 1 or abs(n * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step!r} does not divide 1")
    return n


def cosine_sim(a, b) -> float:
    """Cosine of the angle between two equal-length non-zero vectors."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("cosine_sim needs two vectors of equal length")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0.0 or nb == 0.0:
        raise ValueError("cosine is undefined for a zero vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


def _rowwise_cos(knowledge_rows: np.ndarray, aligned: np.ndarray, what: str) -> np.ndarray:
    nk = np.linalg.norm(knowledge_rows, axis=1)
    ne = np.linalg.norm(aligned, axis=1)
    for name, norms in ((what, nk), ("aligned embedding", ne)):
        zeros = np.nonzero(norms == 0.0)[0]
        if zeros.size:
            raise ValueError(f"cosine is undefined: {name} row {zeros[0]} is all zeros")
    cos = (knowledge_rows * aligned).sum(axis=1) / (nk * ne)
    return np.clip(cos, -1.0, 1.0)


def fit_alignment(concat_rows: np.ndarray, knowledge_dim: int) -> PCAProjector:
    """Projector taking concatenated embeddings into the knowledge dimension.

    When the concatenation is narrower than the knowledge space the data is
    zero-padded before fitting, so the projector's input width is
    max(total embedding dim, knowledge_dim).
    """
    X = np.asarray(concat_rows, dtype=np.float64)
    if X.shape[1] < knowledge_dim:
        X = np.hstack([X, np.zeros((X.shape[0], knowledge_dim - X.shape[1]))])
    return fit_pca(X, knowledge_dim)


def align_embedding(rows: np.ndarray, projector: PCAProjector) -> np.ndarray:
    """Project embedding rows into knowledge space (zero-padding as fit did)."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    if single:
        rows = rows[None, :]
    if rows.shape[1] < projector.input_dim:
        rows = np.hstack([rows, np.zeros((rows.shape[0], projector.input_dim - rows.shape[1]))])
    out = projector.project(rows)
    return out[0] if single else out


def _cosine_pair(knowledge: KnowledgePair, aligned: np.ndarray):
    aligned = np.asarray(aligned, dtype=np.float64)
    if aligned.ndim != 2 or aligned.shape != knowledge.wiki.shape:
        raise ValueError(
            f"aligned matrix shape {aligned.shape} does not match knowledge shape {knowledge.wiki.shape}"
        )
    cw = _rowwise_cos(knowledge.wiki, aligned, "wiki knowledge")
    cc = _rowwise_cos(knowledge.commonsense, aligned, "commonsense knowledge")
    return cw, cc


def _weights_from_cosines(beta: float, cw: np.ndarray, cc: np.ndarray) -> np.ndarray:
    sw = (cw + 1.0) / 2.0
    sc = (cc + 1.0) / 2.0
    return np.clip(beta * sw + (1.0 - beta) * sc, 0.0, 1.0)


def knowledge_weights(beta: Beta, knowledge: KnowledgePair, aligned: np.ndarray) -> RewardWeights:
    """w_i = beta * s_wiki_i + (1 - beta) * s_comm_i with s = (cosine + 1) / 2."""
    cw, cc = _cosine_pair(knowledge, aligned)
    return RewardWeights(_weights_from_cosines(beta.value, cw, cc))


def reward(weights: RewardWeights, predicted, gold) -> float:
    """Total weight over correctly predicted examples."""
    predicted = np.asarray(predicted)
    gold = np.asarray(gold)
    if predicted.shape != gold.shape or predicted.shape != weights.w.shape:
        raise ValueError("weights, predictions, and labels must have equal length")
    return float(np.dot(weights.w, (predicted == gold).astype(np.float64)))


def optimize_beta(
    knowledge: KnowledgePair, aligned: np.ndarray, predicted, gold, grid_step: float = 0.01
) -> Beta:
    """Smallest grid beta maximizing the reward of the given predictions.

    Every grid point j/N is evaluated; ties keep the first (smallest) beta.
    """
    n = _grid_count(grid_step)
    cw, cc = _cosine_pair(knowledge, aligned)
    correct = (np.asarray(predicted) == np.asarray(gold)).astype(np.float64)
    betas = np.arange(n + 1) / n
    rewards = np.array(
        [np.dot(_weights_from_cosines(b, cw, cc), correct) for b in betas]
    )
    return Beta(float(betas[int(np.argmax(rewards))]))


def train_deep(
    inp: EnsembleInput, config: DeepTrainConfig, pca_dim: Optional[int] = None
) -> DeepResult:
    """Run the alternating reward/training loop and score the result.

    The reported beta, reward, and weights are re-optimized against the
    final model's predictions, so they describe the classifier that is
    returned rather than the last round's pre-update state.
    """
    if inp.knowledge is None:
        raise ValueError("the deep strategy requires knowledge embeddings in the input")
    feats, projector = build_features(inp, pca_dim)
    concat = concat_embeddings(inp)
    alignment = fit_alignment(concat, inp.knowledge.dim)
    aligned = align_embedding(concat, alignment)
    ds = inp.dataset
    labels = np.asarray(ds.labels, dtype=np.int64)
    lam = config.rl_weight
    step = config.beta_grid_step

    model = init_classifier(feats.shape[1], ds.num_classes, config.base)
    trace = []
    for rnd in range(config.rounds):
        preds, _ = predict_classifier(model, feats)
        beta = optimize_beta(inp.knowledge, aligned, preds, labels, step)
        w = knowledge_weights(beta, inp.knowledge, aligned)
        rew = reward(w, preds, labels)
        correct = preds == labels
        g = np.where(correct, 1.0 - w.w, w.w)
        per_example = 1.0 + lam * g
        try:
            run_epoch(model, feats, labels, per_example, config.base, rnd)
        except TrainingDivergedError as e:
            raise TrainingDivergedError(rnd, e.batch, unit="round") from None
        ce = weighted_ce(model, feats, labels, per_example)
        after, _ = predict_classifier(model, feats)
        trace.append(
            RoundStats(
                round=rnd,
                beta=beta.value,
                reward=rew,
                train_ce=ce,
                zero_one=int(np.count_nonzero(after != labels)),
            )
        )

    preds, _ = predict_classifier(model, feats)
    final_beta = optimize_beta(inp.knowledge, aligned, preds, labels, step)
    final_w = knowledge_weights(final_beta, inp.knowledge, aligned)
    final_reward = reward(final_w, preds, labels)
    loss = int(np.count_nonzero(preds != labels))
    return DeepResult(
        model=model,
        feature_projector=projector,
        alignment=alignment,
        beta=final_beta,
        reward=final_reward,
        weights=final_w,
        predictions=preds,
        loss=loss,
        accuracy=1.0 - loss / ds.num_examples,
        trace=tuple(trace),
    )
