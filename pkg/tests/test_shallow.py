"""Tests for probability fusion and the simplex weight search.

The searcher is checked against an independent pure-Python oracle that
enumerates the full simplex lattice and applies the documented tie-break
(smallest loss, then largest gold-class probability mass, then
lexicographically smallest weights).
"""

import math

import numpy as np
import pytest

from lm_ensemble.data import (
    EmbeddingMatrix,
    EnsembleInput,
    LabeledDataset,
    ProbMatrix,
    renormalize_rows,
)
from lm_ensemble.shallow import (
    SimplexWeights,
    combine_probs,
    optimize_alpha,
    predict,
    zero_one_loss,
)


# ---------------------------------------------------------------------------
# independent oracle


def lattice_counts(n, resolution):
    """All length-n non-negative integer tuples summing to `resolution`."""
    if n == 1:
        return [(resolution,)]
    out = []
    for head in range(resolution + 1):
        for rest in lattice_counts(n - 1, resolution - head):
            out.append((head,) + rest)
    return out


def oracle_search(prob_rows, labels, resolution):
    """Exhaustive lattice scan in plain Python.

    prob_rows: list over models of list-of-rows (plain float lists).
    Returns (alpha, loss, gold_mass) for the best point under the tie-break.
    """
    n = len(prob_rows)
    m = len(labels)
    c = len(prob_rows[0][0])
    best = None
    for counts in lattice_counts(n, resolution):
        alpha = [k / resolution for k in counts]
        loss = 0
        gold_mass = 0.0
        for i in range(m):
            row = [
                sum(alpha[l] * prob_rows[l][i][k] for l in range(n)) for k in range(c)
            ]
            pred = 0
            for k in range(1, c):
                if row[k] > row[pred]:
                    pred = k
            if pred != labels[i]:
                loss += 1
            gold_mass += row[labels[i]]
        key = (loss, -gold_mass, tuple(alpha))
        if best is None or key < best[0]:
            best = (key, alpha, loss, gold_mass)
    return best[1], best[2], best[3]


def make_input(prob_arrays, labels, num_classes):
    m = len(labels)
    return EnsembleInput(
        dataset=LabeledDataset(
            ids=[f"ex{i}" for i in range(m)],
            labels=np.asarray(labels),
            num_classes=num_classes,
        ),
        prob_matrices=[ProbMatrix(f"model-{j}", np.asarray(p)) for j, p in enumerate(prob_arrays)],
        embedding_matrices=[
            EmbeddingMatrix(f"model-{j}", np.zeros((m, 1))) for j in range(len(prob_arrays))
        ],
    )


def random_instance(rng, n, m, c):
    labels = rng.integers(0, c, size=m)
    probs = [renormalize_rows(rng.random((m, c)) + 1e-3) for _ in range(n)]
    return make_input(probs, labels, c)


# ---------------------------------------------------------------------------
# weights type


class TestSimplexWeights:
    def test_renormalized_to_exact_unit_sum(self):
        w = SimplexWeights((0.2, 0.3, 0.5 - 1e-10))
        assert math.fsum(w.alpha) == 1.0
        assert len(w.alpha) == 3

    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            SimplexWeights((-0.1, 1.1))

    def test_rejects_sum_off_simplex(self):
        with pytest.raises(ValueError):
            SimplexWeights((0.5, 0.6))

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            SimplexWeights(())


# ---------------------------------------------------------------------------
# fusion / prediction / loss primitives


class TestCombinePredictLoss:
    def test_single_model_identity(self):
        inp = random_instance(np.random.default_rng(0), 1, 5, 3)
        out = combine_probs(SimplexWeights((1.0,)), inp)
        np.testing.assert_array_equal(out, inp.prob_matrices[0].rows)

    def test_weighted_average_example(self):
        inp = make_input([[[0.8, 0.2]], [[0.2, 0.8]]], [0], 2)
        out = combine_probs(SimplexWeights((0.25, 0.75)), inp)
        np.testing.assert_allclose(out, [[0.35, 0.65]], atol=1e-12)

    def test_symmetric_example(self):
        inp = make_input([[[1.0, 0.0]], [[0.0, 1.0]]], [0], 2)
        out = combine_probs(SimplexWeights((0.5, 0.5)), inp)
        np.testing.assert_array_equal(out, [[0.5, 0.5]])

    def test_length_mismatch_rejected(self):
        inp = random_instance(np.random.default_rng(1), 2, 4, 2)
        with pytest.raises(ValueError):
            combine_probs(SimplexWeights((1.0,)), inp)

    def test_output_row_stochastic_property(self):
        rng = np.random.default_rng(2)
        for _ in range(25):
            n = int(rng.integers(1, 5))
            inp = random_instance(rng, n, int(rng.integers(1, 20)), int(rng.integers(2, 6)))
            alpha = rng.dirichlet(np.ones(n))
            out = combine_probs(SimplexWeights(tuple(alpha)), inp)
            np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-9)
            assert out.min() >= 0.0

    def test_predict_argmax(self):
        assert predict(np.array([[0.1, 0.7, 0.2]])).tolist() == [1]

    def test_predict_tie_breaks_low_index(self):
        assert predict(np.array([[0.5, 0.5]])).tolist() == [0]
        assert predict(np.array([[0.2, 0.4, 0.4]])).tolist() == [1]

    def test_predict_identity_matrix(self):
        assert predict(np.eye(4)).tolist() == [0, 1, 2, 3]

    def test_zero_one_loss_examples(self):
        assert zero_one_loss(np.array([0, 1, 2]), np.array([0, 1, 2])) == 0
        assert zero_one_loss(np.array([0, 1]), np.array([1, 0])) == 2
        assert zero_one_loss(np.array([0, 0, 1, 1]), np.array([0, 1, 1, 0])) == 2

    def test_zero_one_loss_length_mismatch(self):
        with pytest.raises(ValueError):
            zero_one_loss(np.array([0, 1]), np.array([0]))


# ---------------------------------------------------------------------------
# the searcher


class TestOptimizeAlpha:
    def test_oracle_equivalence_two_models(self):
        rng = np.random.default_rng(7)
        for trial in range(50):
            c = 2 if trial % 2 == 0 else 3
            inp = random_instance(rng, 2, 50, c)
            result = optimize_alpha(inp, grid_resolution=100, random_restarts=0, seed=0)
            prob_rows = [p.rows.tolist() for p in inp.prob_matrices]
            _, oracle_loss, _ = oracle_search(prob_rows, inp.dataset.labels.tolist(), 100)
            assert result.loss == oracle_loss, f"trial {trial}"
            # the returned weights must actually attain the reported loss
            replay = zero_one_loss(
                inp.dataset.labels, predict(combine_probs(result.weights, inp))
            )
            assert replay == result.loss

    def test_oracle_equivalence_three_models(self):
        rng = np.random.default_rng(11)
        for trial in range(5):
            inp = random_instance(rng, 3, 30, 3)
            result = optimize_alpha(inp, grid_resolution=12, random_restarts=0, seed=0)
            prob_rows = [p.rows.tolist() for p in inp.prob_matrices]
            _, oracle_loss, _ = oracle_search(prob_rows, inp.dataset.labels.tolist(), 12)
            assert result.loss == oracle_loss, f"trial {trial}"

    def test_single_model_only_feasible_point(self):
        inp = random_instance(np.random.default_rng(3), 1, 20, 3)
        result = optimize_alpha(inp, grid_resolution=100, random_restarts=4, seed=0)
        assert result.weights.alpha == (1.0,)
        single = zero_one_loss(
            inp.dataset.labels, predict(inp.prob_matrices[0].rows)
        )
        assert result.loss == single

    def test_perfect_versus_adversarial_model(self):
        m, c = 10, 2
        labels = [i % 2 for i in range(m)]
        good = np.array([[0.9, 0.1] if y == 0 else [0.1, 0.9] for y in labels])
        bad = good[:, ::-1].copy()
        inp = make_input([good, bad], labels, c)
        result = optimize_alpha(inp, grid_resolution=100, random_restarts=0, seed=0)
        assert result.weights.alpha == (1.0, 0.0)
        assert result.loss == 0

    def test_two_model_evaluation_count_is_lattice_size(self):
        inp = random_instance(np.random.default_rng(4), 2, 10, 2)
        result = optimize_alpha(inp, grid_resolution=100, random_restarts=32, seed=0)
        assert result.evaluations == 101
        assert len(result.search_trace) == 101

    def test_dominant_model_gives_zero_loss_small_n(self):
        rng = np.random.default_rng(5)
        labels = rng.integers(0, 3, size=25)
        perfect = np.zeros((25, 3))
        perfect[np.arange(25), labels] = 1.0
        noisy = renormalize_rows(rng.random((25, 3)) + 1e-3)
        inp = make_input([noisy, perfect], labels, 3)
        assert optimize_alpha(inp, 100, 0, 0).loss == 0

    def test_dominant_model_gives_zero_loss_sampled_path(self):
        rng = np.random.default_rng(6)
        labels = rng.integers(0, 3, size=25)
        perfect = np.zeros((25, 3))
        perfect[np.arange(25), labels] = 1.0
        others = [renormalize_rows(rng.random((25, 3)) + 1e-3) for _ in range(3)]
        inp = make_input(others[:2] + [perfect] + others[2:], labels, 3)
        result = optimize_alpha(inp, grid_resolution=20, random_restarts=3, seed=0)
        assert result.loss == 0

    def test_gold_mass_tie_break_exact(self):
        # every lattice point predicts correctly; gold mass increases with the
        # first weight, so the tie-break must select the (1, 0) corner.  All
        # values are dyadic so the comparison involves no rounding at all.
        inp = make_input([[[0.75, 0.25]], [[0.5, 0.5]]], [0], 2)
        result = optimize_alpha(inp, grid_resolution=4, random_restarts=0, seed=0)
        assert result.weights.alpha == (1.0, 0.0)
        assert result.loss == 0

    def test_lex_tie_break_exact(self):
        # identical models and dyadic grid make every candidate bitwise equal
        # in loss and gold mass; lexicographically smallest weights win.
        row = [[0.5, 0.5]]
        inp = make_input([row, row], [0], 2)
        result = optimize_alpha(inp, grid_resolution=4, random_restarts=0, seed=0)
        assert result.weights.alpha == (0.0, 1.0)

    def test_loss_outranks_gold_mass(self):
        # model 2 concentrates more mass on gold overall but misclassifies;
        # model 1 is barely right everywhere.  Lower loss must win.
        labels = [0, 0]
        m1 = [[0.6, 0.4], [0.6, 0.4]]
        m2 = [[1.0, 0.0], [0.25, 0.75]]
        inp = make_input([m1, m2], labels, 2)
        result = optimize_alpha(inp, grid_resolution=4, random_restarts=0, seed=0)
        assert result.loss == 0
        replay = zero_one_loss(inp.dataset.labels, predict(combine_probs(result.weights, inp)))
        assert replay == 0

    def test_permutation_equivariance(self):
        m, c = 10, 2
        labels = [i % 2 for i in range(m)]
        good = np.array([[0.9, 0.1] if y == 0 else [0.1, 0.9] for y in labels])
        bad = good[:, ::-1].copy()
        fwd = optimize_alpha(make_input([good, bad], labels, c), 100, 0, 0)
        rev = optimize_alpha(make_input([bad, good], labels, c), 100, 0, 0)
        assert fwd.weights.alpha == tuple(reversed(rev.weights.alpha))
        assert fwd.loss == rev.loss

    def test_deterministic_including_trace(self):
        inp = random_instance(np.random.default_rng(8), 4, 30, 3)
        a = optimize_alpha(inp, grid_resolution=10, random_restarts=5, seed=3)
        b = optimize_alpha(inp, grid_resolution=10, random_restarts=5, seed=3)
        assert a.weights.alpha == b.weights.alpha
        assert a.loss == b.loss
        assert a.accuracy == b.accuracy
        assert a.search_trace == b.search_trace

    def test_trace_entries_are_candidate_loss_pairs(self):
        inp = random_instance(np.random.default_rng(9), 2, 8, 2)
        result = optimize_alpha(inp, grid_resolution=10, random_restarts=0, seed=0)
        for alpha, loss in result.search_trace:
            assert len(alpha) == 2
            assert abs(sum(alpha) - 1.0) < 1e-9
            assert isinstance(loss, int) and 0 <= loss <= 8

    def test_loss_accuracy_consistency(self):
        rng = np.random.default_rng(10)
        for _ in range(10):
            m = int(rng.integers(1, 40))
            inp = random_instance(rng, 2, m, 3)
            r = optimize_alpha(inp, grid_resolution=20, random_restarts=0, seed=0)
            assert r.loss + round(r.accuracy * m) == m

    def test_row_subset_restricts_objective(self):
        # model 1 is perfect on the first half and wrong on the second;
        # model 2 the reverse.  Optimizing on the first half alone must put
        # all weight on model 1.
        labels = [0] * 4 + [1] * 4
        m1 = np.array([[0.9, 0.1]] * 4 + [[0.9, 0.1]] * 4)
        m2 = np.array([[0.1, 0.9]] * 4 + [[0.1, 0.9]] * 4)
        inp = make_input([m1, m2], labels, 2)
        result = optimize_alpha(
            inp, grid_resolution=100, random_restarts=0, seed=0,
            row_subset=np.arange(4),
        )
        assert result.weights.alpha == (1.0, 0.0)
        assert result.loss == 0

    def test_zero_resolution_rejected(self):
        inp = random_instance(np.random.default_rng(12), 2, 4, 2)
        with pytest.raises(ValueError):
            optimize_alpha(inp, grid_resolution=0, random_restarts=0, seed=0)

    def test_sampled_path_capped_and_deterministic(self):
        inp = random_instance(np.random.default_rng(13), 5, 12, 2)
        a = optimize_alpha(inp, grid_resolution=50, random_restarts=2, seed=1)
        b = optimize_alpha(inp, grid_resolution=50, random_restarts=2, seed=1)
        assert a.search_trace == b.search_trace
        assert a.evaluations <= 20000 + 5 + 1 + len(a.search_trace)
