import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from causalshap.attribution import SamplerConfig, exact_shapley, make_exact_marginal_value
from causalshap.datatable import DataTable
from causalshap.evaluation import (
    auroc,
    brier,
    cross_entropy,
    global_importance,
    insertion_curve,
    mask_reference_values,
    reduced_feature_ground_truth,
    reduced_feature_set,
    rmse,
    summarize_insertion_runs,
)
from causalshap.graphs import dag_from_edges
from causalshap.models import train_linear


def pair_counting_auroc(scores, labels):
    """Oracle: direct enumeration of positive/negative pairs, ties as 1/2."""
    scores = np.asarray(scores)
    labels = np.asarray(labels)
    pos = scores[labels == 1]
    neg = scores[labels == 0]
    wins = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                wins += 1.0
            elif p == q:
                wins += 0.5
    return wins / (len(pos) * len(neg))


# -- metrics -------------------------------------------------------------


def test_auroc_perfect_and_ties():
    assert auroc([0.1, 0.2, 0.8, 0.9], [0, 0, 1, 1]) == 1.0
    assert auroc([0.5, 0.5, 0.5, 0.5], [0, 1, 0, 1]) == 0.5


def test_auroc_pair_counting_case():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [0, 0, 1, 1]
    assert pair_counting_auroc(scores, labels) == 0.75
    assert auroc(scores, labels) == pytest.approx(0.75)


def test_auroc_single_class_rejected():
    with pytest.raises(ValueError):
        auroc([0.1, 0.2], [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=2, max_size=40))
def test_auroc_matches_oracle_and_complement(pairs):
    scores = np.array([p[0] for p in pairs])
    labels = np.array([p[1] for p in pairs])
    if labels.min() == labels.max():
        return
    a = auroc(scores, labels)
    assert a == pytest.approx(pair_counting_auroc(scores, labels), abs=1e-12)
    assert auroc(-scores, labels) == pytest.approx(1.0 - a, abs=1e-12)


def test_cross_entropy_and_brier_constants():
    y = np.array([1, 0, 1, 0])
    assert cross_entropy(y, y) == pytest.approx(0.0, abs=1e-6)
    assert brier(y, y) == 0.0
    half = np.full(4, 0.5)
    assert cross_entropy(half, y) == pytest.approx(math.log(2), rel=1e-12)
    assert brier(half, y) == pytest.approx(0.25)


def test_brier_hand_case():
    assert brier([0.9, 0.2], [1, 0]) == pytest.approx(0.025)


def test_cross_entropy_clamps():
    assert math.isfinite(cross_entropy([0.0, 1.0], [1, 0]))
    # clamping is a no-op for probabilities inside the clamp band
    p = np.array([0.2, 0.7])
    y = np.array([0, 1])
    expected = -np.mean([math.log(0.8), math.log(0.7)])
    assert cross_entropy(p, y) == pytest.approx(expected, rel=1e-12)


def test_rmse_known_values():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(math.sqrt(12.5))
    assert rmse([1.0], [4.0]) == 3.0
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])


# -- global ranking --------------------------------------------------------


def test_global_importance_single_instance():
    order = global_importance(np.array([[3.0, -5.0, 1.0]]))
    assert order == [1, 0, 2]


def test_global_importance_tie_break_by_index():
    assert global_importance(np.zeros((4, 3))) == [0, 1, 2]


def test_global_importance_lung(lung_explainer, lung_split):
    matrix, _ = lung_explainer.attribution_matrix(lung_split.test, "causal")
    order = global_importance(matrix)
    assert lung_explainer.feature_names[order[0]] == "smoking"
    assert lung_explainer.feature_names[order[-1]] == "drink_coffee"


# -- insertion -------------------------------------------------------------


class Band01Model:
    """Probability-mode model using only its informative features."""

    prediction_mode = "probability"

    def __init__(self, weights):
        self.weights = np.asarray(weights, dtype=np.float64)
        self.n_features = len(self.weights)

    def predict(self, rows):
        return 1.0 / (1.0 + np.exp(-rows @ self.weights))


def binary_table(seed=0, n=300, informative=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    y = (X[:, informative] + 0.3 * rng.normal(size=n) > 0).astype(float)
    return DataTable(("a", "b", "c", "y"), np.column_stack([X, y]), 3)


def test_insertion_step_one_equals_full_when_others_inert():
    table = binary_table()
    model = Band01Model([2.5, 0.0, 0.0])
    mask = np.zeros(3)
    curve = insertion_curve(model, table, [0, 1, 2], mask)
    assert curve.per_step[0]["auroc"] == pytest.approx(curve.per_step[2]["auroc"])
    assert curve.per_step[0]["brier"] == pytest.approx(curve.per_step[2]["brier"])


def test_insertion_last_step_is_unmasked():
    table = binary_table(seed=1)
    model = Band01Model([1.0, -0.5, 0.25])
    preds = model.predict(table.feature_matrix())
    curve = insertion_curve(model, table, [2, 0, 1], np.zeros(3))
    assert curve.per_step[-1]["auroc"] == pytest.approx(auroc(preds, table.target_values()))
    assert curve.per_step[-1]["cross_entropy"] == pytest.approx(
        cross_entropy(preds, table.target_values())
    )


def test_insertion_informed_beats_random_over_seeds():
    # paired comparison oracle over 5 seeds
    informed_wins = []
    for seed in range(5):
        table = binary_table(seed=seed)
        model = Band01Model([2.0, 0.05, 0.05])
        informed = insertion_curve(model, table, [0, 1, 2], np.zeros(3))
        rng = np.random.default_rng(seed + 50)
        worst = insertion_curve(model, table, [2, 1, 0], np.zeros(3))
        informed_wins.append(informed.aggregate["auroc"] >= worst.aggregate["auroc"])
    assert np.mean(informed_wins) == 1.0


def test_insertion_validation():
    table = binary_table()
    model = Band01Model([1.0, 0.0, 0.0])
    with pytest.raises(ValueError, match="permutation"):
        insertion_curve(model, table, [0, 0, 1], np.zeros(3))
    bad = DataTable(("a", "b", "c", "y"), np.column_stack([np.random.default_rng(0).normal(size=(10, 3)), np.arange(10.0)]), 3)
    with pytest.raises(ValueError, match="binary"):
        insertion_curve(model, bad, [0, 1, 2], np.zeros(3))


def test_summarize_insertion_runs():
    table = binary_table()
    model = Band01Model([2.0, 0.0, 0.0])
    curves = [insertion_curve(model, binary_table(seed=s), [0, 1, 2], np.zeros(3)) for s in range(3)]
    report = summarize_insertion_runs(curves)
    assert report.runs == 3
    values = [c.aggregate["auroc"] for c in curves]
    assert report.mean["auroc"] == pytest.approx(np.mean(values))
    assert report.sd["auroc"] == pytest.approx(np.std(values, ddof=1))


def test_mask_reference_values(lung_split):
    means = mask_reference_values(lung_split.train, "mean")
    np.testing.assert_allclose(means, lung_split.train.feature_matrix().mean(axis=0))
    draw = mask_reference_values(lung_split.train, "marginal-sample", seed=4)
    assert draw.shape == (3,)
    with pytest.raises(ValueError):
        mask_reference_values(lung_split.train, "nonsense")


# -- reduced-set ground truth ----------------------------------------------


def test_reduced_feature_set_rules(lung_explainer, cardio_explainer):
    lung_ext = lung_explainer.effects.extension
    target = lung_explainer.train.target_index
    names = [lung_ext.node_names[i] for i in reduced_feature_set(lung_ext, target)]
    assert names == ["smoking", "stress"]
    cardio_ext = cardio_explainer.effects.extension
    target = cardio_explainer.train.target_index
    names = [cardio_ext.node_names[i] for i in reduced_feature_set(cardio_ext, target)]
    assert names == ["diet_score", "sleep_duration"]


def test_reduced_feature_set_excludes_influenced_nodes():
    dag = dag_from_edges(("a", "b", "y"), [(0, 1), (1, 2)])
    assert reduced_feature_set(dag, 2) == [0]  # b is influenced by a


def test_ground_truth_identical_method_rmse_zero(lung_split):
    red = ["smoking", "stress"]
    target = "lung_cancer_risk"
    red_train = lung_split.train.select_columns(red + [target], target)
    red_test = lung_split.test.select_columns(red + [target], target)
    model = train_linear(red_train)
    background = red_train.feature_matrix()
    X = red_test.feature_matrix()
    exact = np.array(
        [exact_shapley(make_exact_marginal_value(model, background, X[r]), 2) for r in range(X.shape[0])]
    )
    # method matrix = the exact values on the full feature layout
    full = np.zeros((X.shape[0], 3))
    names = list(lung_split.train.feature_names)
    full[:, names.index("smoking")] = exact[:, 0]
    full[:, names.index("stress")] = exact[:, 1]
    report = reduced_feature_ground_truth(
        lambda t: train_linear(t), lung_split.train, lung_split.test, red, full, names
    )
    assert report.rmse == pytest.approx(0.0, abs=1e-12)
    assert report.rmse_signed == pytest.approx(0.0, abs=1e-12)


def test_ground_truth_small_set_matches_permutation_oracle(lung_split):
    # permutation-enumeration oracle equivalence for |reduced| <= 3
    red = ["smoking", "stress"]
    target = "lung_cancer_risk"
    red_train = lung_split.train.select_columns(red + [target], target)
    model = train_linear(red_train)
    background = red_train.feature_matrix()
    x = lung_split.test.select_columns(red + [target], target).feature_matrix()[0]
    value = make_exact_marginal_value(model, background, x)
    subset_phi = exact_shapley(value, 2)
    phi = np.zeros(2)
    for perm in itertools.permutations(range(2)):
        members = []
        prev = value(tuple(members))
        for player in perm:
            members.append(player)
            cur = value(tuple(sorted(members)))
            phi[player] += cur - prev
            prev = cur
    phi /= 2
    np.testing.assert_allclose(subset_phi, phi, rtol=1e-12, atol=1e-14)


def test_ground_truth_rejects_bad_sets(lung_split):
    with pytest.raises(ValueError, match="empty"):
        reduced_feature_ground_truth(
            lambda t: train_linear(t), lung_split.train, lung_split.test, [], np.zeros((1, 3)), ("a", "b", "c")
        )
