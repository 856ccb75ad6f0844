"""Shallow ensembling: a convex combination of the members' probability rows.

The combined prediction for weights alpha on the simplex is
``argmax_k sum_l alpha_l * P_l[i, k]``, scored by 0-1 loss against the gold
labels.  The loss is piecewise constant in alpha, so the optimizer works on
a finite candidate set: the full resolution-G simplex lattice when there are
at most three models, otherwise a seeded lattice sample of comparable size,
and in both cases seeded restarts refined by greedy coordinate descent that
moves 1/G of mass between coordinates while the loss strictly improves.

Ties are broken deterministically: lowest loss, then highest total
probability assigned to the gold classes, then lexicographically smallest
weight vector.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .data import EnsembleInput, renormalize_rows
from .rng import STREAM_RESTARTS, STREAM_SAMPLE, CounterRng

# With more than three models the lattice is sampled instead of enumerated;
# the sample size mirrors the n=3 lattice size but is capped for big grids.
MAX_SAMPLE = 20_000
# Candidate-loss evaluation is chunked so the workspace stays bounded.
_EVAL_CHUNK = 2048


@dataclass(frozen=True)
class SimplexWeights:
    """A weight per model; entries in [0,1], renormalized to exact unit sum."""

    alpha: tuple

    def __post_init__(self):
        a = np.ascontiguousarray(np.asarray(self.alpha, dtype=np.float64))
        if a.ndim != 1 or a.size == 0:
            raise ValueError("alpha must be a non-empty 1-D vector")
        if not np.all(np.isfinite(a)):
            raise ValueError("alpha must be finite")
        if np.any(a < 0.0) or np.any(a > 1.0):
            raise ValueError("alpha entries must lie in [0, 1]")
        if abs(float(a.sum()) - 1.0) > 1e-9:
            raise ValueError(f"alpha must sum to 1 within 1e-9, got sum {a.sum()!r}")
        if float(a.sum()) != 1.0:
            a = renormalize_rows(a[None, :])[0]
        object.__setattr__(self, "alpha", tuple(float(x) for x in a))

    @property
    def num_models(self) -> int:
        return len(self.alpha)


@dataclass(frozen=True)
class ShallowResult:
    weights: SimplexWeights
    loss: int
    accuracy: float
    search_trace: tuple  # ((alpha tuple, loss) per candidate evaluated, in order)

    @property
    def evaluations(self) -> int:
        return len(self.search_trace)


def _prob_stack(inp: EnsembleInput) -> np.ndarray:
    return np.stack([p.rows for p in inp.prob_matrices], axis=0)  # (n, m, c)


def combine_probs(weights: SimplexWeights, inp: EnsembleInput) -> np.ndarray:
    """Weighted sum of the member probability matrices."""
    if weights.num_models != inp.num_models:
        raise ValueError(f"{weights.num_models} weights for {inp.num_models} models")
    return np.tensordot(weights.alpha, _prob_stack(inp), axes=(0, 0))


def predict(prob_rows: np.ndarray) -> np.ndarray:
    """Class with the highest probability per row; ties go to the lowest index."""
    return np.argmax(prob_rows, axis=1).astype(np.int64)


def zero_one_loss(gold, predicted) -> int:
    """Number of positions where the predictions differ from the gold labels."""
    gold = np.asarray(gold)
    predicted = np.asarray(predicted)
    if gold.shape != predicted.shape:
        raise ValueError("gold and predicted differ in length")
    return int(np.count_nonzero(gold != predicted))


def _lattice_points(n: int, resolution: int) -> np.ndarray:
    """All count vectors summing to ``resolution``, in lexicographic order."""
    comps = []
    counts = np.zeros(n, dtype=np.int64)

    def rec(pos: int, remaining: int):
        if pos == n - 1:
            counts[pos] = remaining
            comps.append(counts.copy())
            return
        for c in range(remaining + 1):
            counts[pos] = c
            rec(pos + 1, remaining - c)

    rec(0, resolution)
    return np.asarray(comps, dtype=np.int64)


def _lattice_size(n: int, resolution: int) -> int:
    return math.comb(resolution + n - 1, n - 1)


def _snap_to_lattice(alphas: np.ndarray, resolution: int) -> np.ndarray:
    """Round simplex vectors to integer counts summing to the resolution
    (largest-remainder apportionment; remainder ties favor lower indices)."""
    scaled = alphas * resolution
    base = np.floor(scaled).astype(np.int64)
    short = resolution - base.sum(axis=1)
    remainder = scaled - base
    order = np.argsort(-remainder, axis=1, kind="stable")
    for row in range(base.shape[0]):
        k = int(short[row])
        if k > 0:
            base[row, order[row, :k]] += 1
        elif k < 0:  # cannot happen with exact floors; kept to preserve the sum
            base[row, order[row, k:]] -= 1
    return base


def _eval_counts(counts: np.ndarray, stack: np.ndarray, labels: np.ndarray, resolution: int):
    """0-1 loss and summed gold-class probability for each candidate count row."""
    n, m, c = stack.shape
    flat = stack.reshape(n, m * c)
    losses = np.empty(counts.shape[0], dtype=np.int64)
    gold = np.empty(counts.shape[0], dtype=np.float64)
    rows = np.arange(m)
    for start in range(0, counts.shape[0], _EVAL_CHUNK):
        chunk = counts[start : start + _EVAL_CHUNK]
        alphas = chunk.astype(np.float64) / float(resolution)
        combined = (alphas @ flat).reshape(-1, m, c)
        preds = combined.argmax(axis=2)
        losses[start : start + chunk.shape[0]] = (preds != labels).sum(axis=1)
        gold[start : start + chunk.shape[0]] = combined[:, rows, labels].sum(axis=1)
    return losses, gold


def _better(cand, best) -> bool:
    """Candidate ordering: loss asc, gold-mass desc, counts lexicographic asc."""
    c_loss, c_gold, c_counts = cand
    b_loss, b_gold, b_counts = best
    if c_loss != b_loss:
        return c_loss < b_loss
    if c_gold != b_gold:
        return c_gold > b_gold
    return tuple(c_counts) < tuple(b_counts)


def _trace_entries(counts: np.ndarray, losses: np.ndarray, resolution: int, out: list):
    alphas = counts.astype(np.float64) / float(resolution)
    for row, loss in zip(alphas, losses):
        out.append((tuple(row), int(loss)))


def _descend(counts: np.ndarray, stack, labels, resolution, trace: list):
    """Greedy coordinate descent: shift one 1/resolution unit of mass between a
    pair of coordinates whenever the loss strictly improves."""
    n = counts.size
    cur = counts.copy()
    losses, gold = _eval_counts(cur[None, :], stack, labels, resolution)
    _trace_entries(cur[None, :], losses, resolution, trace)
    cur_loss, cur_gold = int(losses[0]), float(gold[0])
    improved = True
    while improved:
        improved = False
        moves = []
        for src in range(n):
            if cur[src] == 0:
                continue
            for dst in range(n):
                if dst == src:
                    continue
                nb = cur.copy()
                nb[src] -= 1
                nb[dst] += 1
                moves.append(nb)
        if not moves:
            break
        moves = np.asarray(moves)
        mlosses, mgold = _eval_counts(moves, stack, labels, resolution)
        _trace_entries(moves, mlosses, resolution, trace)
        k = int(np.argmin(mlosses))
        if int(mlosses[k]) < cur_loss:
            cur, cur_loss, cur_gold = moves[k], int(mlosses[k]), float(mgold[k])
            improved = True
    return cur, cur_loss, cur_gold


def optimize_alpha(
    inp: EnsembleInput,
    grid_resolution: int = 100,
    random_restarts: int = 32,
    seed: int = 0,
    row_subset: Optional[np.ndarray] = None,
) -> ShallowResult:
    """Search the simplex for the weights minimizing 0-1 loss.

    With up to three models the full resolution-G lattice is scanned, so the
    result is exact at that resolution.  With more models the scan covers a
    seeded lattice sample (size matching the three-model lattice, capped at
    :data:`MAX_SAMPLE`) plus the uniform point and the one-model corners,
    refined by seeded coordinate-descent restarts.  ``row_subset`` restricts
    scoring to those example indices.
    """
    if grid_resolution < 1:
        raise ValueError("grid_resolution must be a positive integer")
    if random_restarts < 0:
        raise ValueError("random_restarts must be non-negative")
    stack = _prob_stack(inp)
    gold = np.asarray(inp.dataset.labels, dtype=np.int64)
    if row_subset is not None:
        stack = stack[:, row_subset, :]
        gold = gold[row_subset]
    n, m, _ = stack.shape

    G = grid_resolution
    exhaustive = n <= 3
    if exhaustive:
        candidates = _lattice_points(n, G)
    else:
        size = min(_lattice_size(n, G), MAX_SAMPLE)
        sample_rng = CounterRng(seed, STREAM_SAMPLE)
        draws = np.stack([sample_rng.dirichlet_uniform(n) for _ in range(size)])
        # Stratify by dominant coordinate: draw i covers the region where
        # model (i mod n) carries the largest weight.
        for i in range(size):
            s = i % n
            j = int(np.argmax(draws[i]))
            draws[i, [s, j]] = draws[i, [j, s]]
        sampled = _snap_to_lattice(draws, G)
        corners = np.eye(n, dtype=np.int64) * G
        uniform = _snap_to_lattice(np.full((1, n), 1.0 / n), G)
        candidates = np.unique(np.vstack([sampled, corners, uniform]), axis=0)

    trace: list = []
    losses, goldmass = _eval_counts(candidates, stack, gold, G)
    _trace_entries(candidates, losses, G, trace)
    order = np.lexsort((*(candidates[:, i] for i in range(n - 1, -1, -1)), -goldmass, losses))
    k = order[0]
    best = (int(losses[k]), float(goldmass[k]), candidates[k].copy())

    if not exhaustive and random_restarts > 0:
        restart_rng = CounterRng(seed, STREAM_RESTARTS)
        starts = _snap_to_lattice(
            np.stack([restart_rng.dirichlet_uniform(n) for _ in range(random_restarts)]), G
        )
        for row in starts:
            counts, loss, gmass = _descend(row, stack, gold, G, trace)
            cand = (loss, gmass, counts)
            if _better(cand, best):
                best = cand

    alpha = SimplexWeights(best[2].astype(np.float64) / float(G))
    return ShallowResult(
        weights=alpha,
        loss=best[0],
        accuracy=1.0 - best[0] / m,
        search_trace=tuple(trace),
    )
