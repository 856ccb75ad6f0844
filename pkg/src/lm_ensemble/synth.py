"""Deterministic synthetic scenarios exercising each strategy's signature trait.

Four constructions, generated from a seeded counter RNG so identical seeds
yield byte-identical files (the RNG and each construction are documented in
docs/FORMAT.md):

- A "complementary-experts": two models, each confidently correct on its own
  half of the examples and uniform on the other half.  Gold labels avoid
  class 0, so a lone model's uniform half all breaks ties to class 0 and
  scores exactly m/2 errors, while mixing both models at (0.5, 0.5) scores 0.
- B "separable-embeddings": per-class Gaussian embedding clusters with a wide
  margin, so the embedding classifier can reach near-perfect accuracy.
- C "knowledge-aligned": class 1 and class 2 clusters nearly overlap, and the
  knowledge rows point along each example's aligned ensemble embedding for
  gold class 2 and against it otherwise, so the reward weights mark the
  confusable class.
- D "adversarial-knowledge": knowledge rows are label-independent noise, so
  reward differences between the two knowledge sources are near zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .data import (
    EmbeddingMatrix,
    EnsembleInput,
    KnowledgePair,
    LabeledDataset,
    ProbMatrix,
    concat_embeddings,
    renormalize_rows,
    write_input,
)
from .deep import align_embedding, fit_alignment
from .rng import (
    STREAM_EMBED,
    STREAM_KNOWLEDGE,
    STREAM_LABELS,
    STREAM_PROBS,
    CounterRng,
)

SCENARIO_NAMES = ("A", "B", "C", "D")


@dataclass(frozen=True)
class Scenario:
    name: str
    m: int
    c: int
    n: int
    dims: tuple
    seed: int
    knowledge_dim: Optional[int] = None

    def __post_init__(self):
        if self.name not in SCENARIO_NAMES:
            raise ValueError(f"unknown scenario {self.name!r}; choose one of {SCENARIO_NAMES}")
        if self.m < 2 or self.c < 2 or self.n < 1 or len(self.dims) != self.n:
            raise ValueError("scenario sizes are out of range")


def preset(name: str, seed: int) -> Scenario:
    """The canonical sizing for each scenario letter."""
    name = name.upper()
    if name == "A":
        return Scenario(name="A", m=100, c=4, n=2, dims=(4, 4), seed=seed)
    if name == "B":
        return Scenario(name="B", m=100, c=2, n=2, dims=(8, 4), seed=seed)
    if name == "C":
        return Scenario(name="C", m=120, c=3, n=2, dims=(8, 6), seed=seed, knowledge_dim=8)
    if name == "D":
        return Scenario(name="D", m=100, c=3, n=2, dims=(6, 4), seed=seed, knowledge_dim=32)
    raise ValueError(f"unknown scenario {name!r}; choose one of {SCENARIO_NAMES}")


def _ids(m: int) -> tuple:
    return tuple(f"ex{i:04d}" for i in range(m))


def _confident_rows(labels: np.ndarray, c: int, peak: float) -> np.ndarray:
    rows = np.full((labels.size, c), (1.0 - peak) / (c - 1))
    rows[np.arange(labels.size), labels] = peak
    return rows


def _noisy_prob_rows(labels, c, peak, flip_rate, rng: CounterRng) -> np.ndarray:
    """Confident rows whose peak moves to a wrong class for a seeded subset."""
    m = labels.size
    peaked = labels.copy()
    flips = rng.uniforms((m,)) < flip_rate
    offsets = 1 + rng.integers(c - 1, (m,))
    peaked[flips] = (labels[flips] + offsets[flips]) % c
    return _confident_rows(peaked, c, peak)


def _build_a(s: Scenario) -> EnsembleInput:
    half = s.m // 2
    labels = 1 + CounterRng(s.seed, STREAM_LABELS).integers(s.c - 1, (s.m,))
    expert_of = np.where(np.arange(s.m) < half, 0, 1)
    probs = []
    for j in range(s.n):
        rows = np.full((s.m, s.c), 1.0 / s.c)
        mine = expert_of == j
        rows[mine] = _confident_rows(labels[mine], s.c, 0.9)
        probs.append(rows)
    erng = CounterRng(s.seed, STREAM_EMBED)
    embeds = [erng.normals((s.m, d)) for d in s.dims]
    return _assemble(s, labels, probs, embeds, None)


def _cluster_embeddings(labels, dims, means, noise, rng: CounterRng):
    """Per-model Gaussian clusters: row i ~ means[label_i] + noise * N(0, I)."""
    out = []
    for j, d in enumerate(dims):
        base = np.asarray([mean[:d] for mean in means[j]])
        out.append(base[labels] + noise * rng.normals((labels.size, d)))
    return out


def _build_b(s: Scenario) -> EnsembleInput:
    labels = CounterRng(s.seed, STREAM_LABELS).integers(s.c, (s.m,))
    erng = CounterRng(s.seed, STREAM_EMBED)
    means = []
    for d in s.dims:
        model_means = np.zeros((s.c, d))
        for k in range(s.c):
            model_means[k, k % d] = 3.0
        means.append(model_means)
    embeds = _cluster_embeddings(labels, s.dims, means, 0.5, erng)
    prng = CounterRng(s.seed, STREAM_PROBS)
    probs = [
        _noisy_prob_rows(labels, s.c, 0.8, 0.10, prng),
        _noisy_prob_rows(labels, s.c, 0.7, 0.15, prng),
    ]
    return _assemble(s, labels, probs, embeds, None)


def _unit_rows(rows: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(rows, axis=1, keepdims=True)
    safe = np.where(norms == 0.0, 1.0, norms)
    out = rows / safe
    out[norms[:, 0] == 0.0, 0] = 1.0  # degenerate rows point along the first axis
    return out


def _build_c(s: Scenario) -> EnsembleInput:
    # Class 2 is rare (~12%) and overlaps class 1, so a fixed epoch budget
    # leaves it underfit; class 0 sits far away and is easy.
    u = CounterRng(s.seed, STREAM_LABELS).uniforms((s.m,))
    labels = np.where(u < 0.4, 0, np.where(u < 0.88, 1, 2)).astype(np.int64)
    erng = CounterRng(s.seed, STREAM_EMBED)
    means = []
    for d in s.dims:
        model_means = np.zeros((s.c, d))
        model_means[0, 0] = -4.0
        model_means[1, 0] = 4.0
        model_means[1, 1] = 0.7
        model_means[2, 0] = 4.0
        model_means[2, 1] = -0.7
        means.append(model_means)
    embeds = _cluster_embeddings(labels, s.dims, means, 0.65, erng)
    prng = CounterRng(s.seed, STREAM_PROBS)
    probs = [
        _noisy_prob_rows(labels, s.c, 0.6, 0.2, prng),
        _noisy_prob_rows(labels, s.c, 0.55, 0.25, prng),
    ]
    inp = _assemble(s, labels, probs, embeds, None)
    aligned = align_embedding(
        concat_embeddings(inp), fit_alignment(concat_embeddings(inp), s.knowledge_dim)
    )
    direction = _unit_rows(aligned)
    # Knowledge rows point along the aligned embedding with class-dependent
    # off-axis noise: near-perfect alignment (weight ~1) for the confusable
    # class 2, partial alignment (weight ~0.8) elsewhere.  Training mistakes
    # then carry extra weight everywhere — most on class 2 — while correct
    # class-2 examples carry none.
    krng = CounterRng(s.seed, STREAM_KNOWLEDGE)
    spread = np.where(labels == 2, 0.05, 1.4)[:, None] / np.sqrt(s.knowledge_dim)
    wiki = direction + spread * krng.normals((s.m, s.knowledge_dim))
    commonsense = direction + 1.3 * spread * krng.normals((s.m, s.knowledge_dim))
    return _assemble(s, labels, probs, embeds, KnowledgePair(wiki=wiki, commonsense=commonsense))


def _build_d(s: Scenario) -> EnsembleInput:
    labels = CounterRng(s.seed, STREAM_LABELS).integers(s.c, (s.m,))
    erng = CounterRng(s.seed, STREAM_EMBED)
    embeds = [erng.normals((s.m, d)) for d in s.dims]
    prng = CounterRng(s.seed, STREAM_PROBS)
    probs = [
        _noisy_prob_rows(labels, s.c, 0.7, 0.25, prng),
        _noisy_prob_rows(labels, s.c, 0.6, 0.30, prng),
    ]
    krng = CounterRng(s.seed, STREAM_KNOWLEDGE)
    knowledge = KnowledgePair(
        wiki=krng.normals((s.m, s.knowledge_dim)),
        commonsense=krng.normals((s.m, s.knowledge_dim)),
    )
    return _assemble(s, labels, probs, embeds, knowledge)


def _assemble(s: Scenario, labels, probs, embeds, knowledge) -> EnsembleInput:
    dataset = LabeledDataset(ids=_ids(s.m), labels=labels, num_classes=s.c)
    return EnsembleInput(
        dataset=dataset,
        prob_matrices=[
            ProbMatrix(f"model-{j}", renormalize_rows(rows)) for j, rows in enumerate(probs)
        ],
        embedding_matrices=[
            EmbeddingMatrix(f"model-{j}", rows) for j, rows in enumerate(embeds)
        ],
        knowledge=knowledge,
    )


_BUILDERS = {"A": _build_a, "B": _build_b, "C": _build_c, "D": _build_d}


def build_scenario(scenario: Scenario) -> EnsembleInput:
    """The in-memory input for a scenario (what generate() writes to disk)."""
    return _BUILDERS[scenario.name](scenario)


def generate(scenario: Scenario, out_dir) -> Path:
    """Write the scenario's files under out_dir; returns the manifest path."""
    return write_input(build_scenario(scenario), out_dir)
