import numpy as np
import pytest

from causalshap.datatable import DataTable
from causalshap.forest import RandomForestModel, train_random_forest
from causalshap.models import (
    Baseline,
    LinearModel,
    SingularSystemError,
    expected_prediction,
    load_model,
    predict_batch,
    save_model,
    train_linear,
)


def table_from(X, y, names=None):
    X = np.asarray(X, dtype=np.float64)
    names = names or tuple(f"x{i}" for i in range(X.shape[1])) + ("y",)
    return DataTable(names, np.column_stack([X, y]), X.shape[1])


# -- linear ------------------------------------------------------------


def test_linear_exact_fit():
    x = np.linspace(-3, 3, 20)
    model = train_linear(table_from(x[:, None], 2 * x))
    assert model.weights[0] == pytest.approx(2.0, abs=1e-9)
    assert model.intercept == pytest.approx(0.0, abs=1e-9)


def test_linear_recovers_lung_weights(lung_split):
    model = train_linear(lung_split.train)
    w = dict(zip(lung_split.train.feature_names, model.weights))
    assert w["smoking"] == pytest.approx(2.0, abs=0.2)
    assert w["stress"] == pytest.approx(1.2, abs=0.2)
    assert abs(w["drink_coffee"]) < 0.2  # near-collinear term stays small


def test_ridge_limit_shrinks_weights():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    y = X @ np.array([1.0, -2.0, 0.5]) + rng.normal(size=50)
    model = train_linear(table_from(X, y), ridge_lambda=1e12)
    assert np.all(np.abs(model.weights) < 1e-6)


def test_linear_singular_at_lambda_zero():
    X = np.ones((10, 2))  # perfectly collinear columns
    with pytest.raises(SingularSystemError):
        train_linear(table_from(X, X[:, 0]))
    with pytest.raises(SingularSystemError):
        train_linear(table_from(np.ones((2, 3)), np.ones(2)))  # n <= p


def test_predict_batch_contract():
    model = LinearModel([1.0, 1.0], 0.0)
    assert predict_batch(model, np.empty((0, 2))).shape == (0,)
    assert predict_batch(model, [[2.0, 3.0]])[0] == pytest.approx(5.0)
    with pytest.raises(ValueError, match="width"):
        predict_batch(model, np.ones((3, 5)))


# -- baseline ----------------------------------------------------------


class ConstantModel:
    kind = "constant"
    prediction_mode = "regression"
    n_features = 2

    def predict(self, rows):
        return np.full(rows.shape[0], 7.25)


def test_baseline_constant_model():
    table = table_from(np.zeros((4, 2)), np.zeros(4))
    base = expected_prediction(ConstantModel(), table)
    assert base == Baseline(7.25, 4)


def test_baseline_standardized_inputs_near_zero():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(400, 3))
    X = (X - X.mean(axis=0)) / X.std(axis=0)
    model = LinearModel([0.5, -1.0, 2.0], 0.0)
    base = expected_prediction(model, table_from(X, np.zeros(400)))
    assert abs(base.expected_prediction) < 5 / np.sqrt(400)


def test_baseline_single_row():
    table = table_from([[1.0, 2.0]], [0.0])
    model = LinearModel([1.0, 1.0], 1.0)
    assert expected_prediction(model, table).expected_prediction == pytest.approx(4.0)


def test_baseline_matches_predict_mean(lung_split):
    model = train_linear(lung_split.train)
    base = expected_prediction(model, lung_split.train)
    preds = predict_batch(model, lung_split.train.feature_matrix())
    assert base.expected_prediction == pytest.approx(preds.mean(), rel=1e-15)


# -- random forest -----------------------------------------------------


def test_forest_constant_target():
    rng = np.random.default_rng(2)
    table = table_from(rng.normal(size=(40, 2)), np.full(40, 3.5))
    model = train_random_forest(table, n_trees=5, seed=0)
    preds = predict_batch(model, table.feature_matrix())
    np.testing.assert_allclose(preds, 3.5)


def test_forest_xor_accuracy():
    # two-feature XOR-style classification; direct evaluation on the train set
    rng = np.random.default_rng(3)
    X = rng.uniform(-1, 1, size=(400, 2))
    y = ((X[:, 0] > 0) ^ (X[:, 1] > 0)).astype(float)
    table = table_from(X, y)
    model = train_random_forest(table, n_trees=100, max_depth=4, min_leaf=2, seed=0)
    assert model.prediction_mode == "probability"
    preds = predict_batch(model, X)
    accuracy = ((preds > 0.5) == (y == 1)).mean()
    assert accuracy >= 0.95


def test_forest_single_tree_exact_fit():
    # tree-traversal oracle: an unbagged, fully grown tree memorises the data
    rng = np.random.default_rng(4)
    X = rng.normal(size=(60, 3))
    y = rng.normal(size=60)
    table = table_from(X, y)
    model = train_random_forest(
        table, n_trees=1, max_depth=64, min_leaf=1, seed=0, bootstrap=False
    )
    np.testing.assert_allclose(predict_batch(model, X), y, atol=1e-12)


def test_forest_stump_collapse():
    rng = np.random.default_rng(5)
    X = rng.normal(size=(30, 2))
    y = rng.normal(size=30)
    table = table_from(X, y)
    model = train_random_forest(table, n_trees=1, min_leaf=30, seed=1, bootstrap=False)
    np.testing.assert_allclose(predict_batch(model, X), y.mean())


def test_forest_regression_bounds_and_determinism():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(150, 4))
    y = X[:, 0] * 2 + rng.normal(size=150)
    table = table_from(X, y)
    a = train_random_forest(table, n_trees=20, seed=9)
    b = train_random_forest(table, n_trees=20, seed=9)
    grid = rng.normal(size=(300, 4)) * 3
    pa, pb = predict_batch(a, grid), predict_batch(b, grid)
    np.testing.assert_array_equal(pa, pb)
    assert pa.min() >= y.min() and pa.max() <= y.max()


def test_forest_probability_bounds():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(200, 3))
    y = (X[:, 0] + rng.normal(size=200) > 0).astype(float)
    model = train_random_forest(table_from(X, y), n_trees=30, seed=0)
    preds = predict_batch(model, rng.normal(size=(500, 3)) * 4)
    assert np.all(preds >= 0.0) and np.all(preds <= 1.0)


def test_forest_oversized_min_leaf_collapses_not_errors():
    rng = np.random.default_rng(10)
    table = table_from(rng.normal(size=(4, 1)), np.array([1.0, 2.0, 3.0, 6.0]))
    model = train_random_forest(table, n_trees=3, min_leaf=5, seed=0, bootstrap=False)
    np.testing.assert_allclose(predict_batch(model, table.feature_matrix()), 3.0)


# -- persistence -------------------------------------------------------


def test_model_json_round_trip(tmp_path, lung_split):
    rng = np.random.default_rng(8)
    grid = rng.normal(5, 2, size=(50, 3))

    linear = train_linear(lung_split.train)
    path = tmp_path / "linear.json"
    save_model(linear, path)
    back = load_model(path)
    np.testing.assert_allclose(predict_batch(back, grid), predict_batch(linear, grid))

    forest = train_random_forest(lung_split.train, n_trees=10, seed=0)
    path = tmp_path / "forest.json"
    save_model(forest, path)
    back = load_model(path)
    assert isinstance(back, RandomForestModel)
    assert back.prediction_mode == forest.prediction_mode
    np.testing.assert_array_equal(predict_batch(back, grid), predict_batch(forest, grid))
