import io
import json

import numpy as np
import pytest

from sentiscope.models.api import (
    ALGORITHMS,
    MODEL_FORMAT,
    ModelSpec,
    fit,
    load_model,
    model_from_doc,
    predict,
    regression_cart_like_forest,
    save_model,
)
from sentiscope.models.trees import build_cart, build_forest


def _regression_data(n=80, p=4, seed=0):
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    X = rng.standard_normal((n, p))
    y = 1.5 * X[:, 0] - X[:, 1] + 0.1 * rng.standard_normal(n)
    return X, y


def _classification_data(n=90, p=4, seed=1):
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    X = rng.standard_normal((n, p))
    labels = np.where(X[:, 0] + 0.3 * rng.standard_normal(n) > 0, "pos", "neg")
    return X, [str(s) for s in labels]


FEATURES = ["f0", "f1", "f2", "f3"]


# --- specs -----------------------------------------------------------------------

def test_spec_validation():
    with pytest.raises(ValueError, match="algorithm"):
        ModelSpec.make("svm", "regression")
    with pytest.raises(ValueError, match="task"):
        ModelSpec.make("knn", "ranking")
    with pytest.raises(TypeError):
        ModelSpec.make("knn", "regression", bogus=3)
    with pytest.raises(ValueError):
        ModelSpec.make("knn", "regression", k=0)
    with pytest.raises(ValueError):
        ModelSpec.make("cart", "regression", min_leaf=0)
    with pytest.raises(ValueError):
        ModelSpec.make("random_forest", "regression", sample_mode="jackknife")
    with pytest.raises(ValueError):
        ModelSpec.make("gbm", "regression", subsample=0.0)


def test_spec_defaults():
    spec = ModelSpec.make("random_forest", "regression")
    assert spec.hyperparameters.tree_count == 500
    assert spec.hyperparameters.mtry is None  # resolved per dataset at fit
    assert spec.seed == 0
    cart = ModelSpec.make("cart", "classification")
    assert (cart.hyperparameters.min_split, cart.hyperparameters.min_leaf,
            cart.hyperparameters.max_depth, cart.hyperparameters.cp) == (20, 7, 30, 0.01)
    gbm = ModelSpec.make("gbm", "regression")
    assert (gbm.hyperparameters.tree_count, gbm.hyperparameters.depth,
            gbm.hyperparameters.shrinkage, gbm.hyperparameters.subsample) == \
        (100, 3, 0.1, 0.5)


# --- fit/predict behaviour ---------------------------------------------------------

@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_regression_fit_predict_shapes(algorithm):
    X, y = _regression_data()
    spec = ModelSpec.make(algorithm, "regression", seed=3, **(
        {"tree_count": 20} if algorithm in ("random_forest", "gbm") else {}))
    model = fit(spec, X, y, FEATURES)
    preds = predict(model, X)
    assert preds.shape == (X.shape[0],)
    assert np.all(np.isfinite(preds))
    again = predict(fit(spec, X, y, FEATURES), X)
    assert np.array_equal(preds, again)


@pytest.mark.parametrize("algorithm", ALGORITHMS)
def test_classification_fit_predict_shapes(algorithm):
    X, labels = _classification_data()
    spec = ModelSpec.make(algorithm, "classification", seed=3, **(
        {"tree_count": 20} if algorithm in ("random_forest", "gbm") else {}))
    model = fit(spec, X, labels, FEATURES)
    assert model.class_levels == ("neg", "pos")  # sorted distinct labels
    pred = predict(model, X)
    assert len(pred.labels) == X.shape[0]
    assert set(pred.labels) <= {"neg", "pos"}
    assert pred.scores.shape == (X.shape[0], 2)
    if algorithm != "gbm":  # gbm scores are raw booster outputs, not shares
        assert np.allclose(pred.scores.sum(axis=1), 1.0)
    codes = pred.codes
    assert np.array_equal(np.asarray(pred.labels),
                          np.asarray(model.class_levels)[codes])


def test_cart_fits_separable_data_exactly():
    X = np.array([[0.0], [1.0], [2.0], [10.0], [11.0], [12.0]])
    y = np.array([1.0, 1.0, 1.0, 5.0, 5.0, 5.0])
    spec = ModelSpec.make("cart", "regression", min_split=2, min_leaf=1, cp=0.0)
    model = fit(spec, X, y, ["x"])
    assert np.array_equal(predict(model, X), y)


def test_knn_k1_returns_nearest_target():
    X = np.array([[0.0], [10.0], [20.0]])
    y = np.array([1.0, 2.0, 3.0])
    model = fit(ModelSpec.make("knn", "regression", k=1), X, y, ["x"])
    assert np.array_equal(predict(model, np.array([[9.0], [19.0], [-5.0]])),
                          np.array([2.0, 3.0, 1.0]))


def test_knn_k_must_fit_sample():
    X, y = _regression_data(n=5)
    with pytest.raises(ValueError):
        fit(ModelSpec.make("knn", "regression", k=6), X, y, FEATURES)


def test_gbm_zero_rounds_predicts_mean():
    X, y = _regression_data(n=30)
    model = fit(ModelSpec.make("gbm", "regression", tree_count=0), X, y, FEATURES)
    assert np.allclose(predict(model, X), np.mean(y), atol=0, rtol=0)


def test_single_full_tree_forest_equals_cart():
    X, y = _regression_data(n=60)
    spec = ModelSpec.make("random_forest", "regression", tree_count=1,
                          sample_mode="full", mtry=4, min_node=5)
    forest_pred = predict(fit(spec, X, y, FEATURES), X)
    tree = regression_cart_like_forest(X, y)
    assert np.array_equal(forest_pred, tree.predict_value(X))


def test_forest_mtry_default_rules():
    from sentiscope.models.api import _default_mtry

    assert _default_mtry("regression", 4) == 1  # floor(4 / 3)
    assert _default_mtry("classification", 4) == 2  # floor(sqrt(4))
    assert _default_mtry("regression", 10) == 3
    assert _default_mtry("classification", 10) == 3
    assert _default_mtry("regression", 1) == 1
    assert _default_mtry("classification", 1) == 1


def test_fit_rejects_bad_inputs():
    X, y = _regression_data(n=20)
    spec = ModelSpec.make("cart", "regression")
    with pytest.raises(ValueError):
        fit(spec, X[:, :2], y, FEATURES)  # width mismatch
    with pytest.raises(ValueError):
        fit(spec, X, y[:-1], FEATURES)
    bad = X.copy()
    bad[0, 0] = np.nan
    with pytest.raises(ValueError):
        fit(spec, bad, y, FEATURES)
    with pytest.raises(ValueError):
        fit(ModelSpec.make("cart", "classification"), X,
            ["only"] * X.shape[0], FEATURES)  # a single class is no task


def test_predict_validates_columns():
    X, y = _regression_data(n=20)
    model = fit(ModelSpec.make("cart", "regression"), X, y, FEATURES)
    with pytest.raises(ValueError):
        predict(model, X[:, :3])
    with pytest.raises(ValueError):
        predict(model, X, columns=["f0", "f1", "f2", "other"])
    out = predict(model, X, columns=FEATURES)
    assert out.shape == (20,)


# --- persistence -----------------------------------------------------------------

@pytest.mark.parametrize("algorithm", ALGORITHMS)
@pytest.mark.parametrize("task", ["regression", "classification"])
def test_save_load_round_trip_is_bit_exact(tmp_path, algorithm, task):
    if task == "regression":
        X, target = _regression_data(n=40)
    else:
        X, target = _classification_data(n=40)
    spec = ModelSpec.make(algorithm, task, seed=7, **(
        {"tree_count": 10} if algorithm in ("random_forest", "gbm") else {}))
    model = fit(spec, X, target, FEATURES)
    path = tmp_path / "model.json"
    save_model(model, path)
    loaded = load_model(path)
    assert loaded.spec == model.spec
    assert loaded.feature_names == model.feature_names
    if task == "regression":
        assert np.array_equal(predict(model, X), predict(loaded, X))
    else:
        a, b = predict(model, X), predict(loaded, X)
        assert a.labels == b.labels
        assert np.array_equal(a.scores, b.scores)


def test_model_doc_format_is_versioned():
    X, y = _regression_data(n=20)
    model = fit(ModelSpec.make("cart", "regression"), X, y, FEATURES)
    buf = io.StringIO()
    save_model(model, buf)
    doc = json.loads(buf.getvalue())
    assert doc["format"] == MODEL_FORMAT
    doc["format"] = "sentiscope-model/999"
    with pytest.raises(ValueError, match="format"):
        model_from_doc(doc)


def test_save_is_deterministic(tmp_path):
    X, y = _regression_data(n=30)
    spec = ModelSpec.make("random_forest", "regression", tree_count=5, seed=2)
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    save_model(fit(spec, X, y, FEATURES), p1)
    save_model(fit(spec, X, y, FEATURES), p2)
    assert p1.read_bytes() == p2.read_bytes()


# --- tree internals ---------------------------------------------------------------

def test_cart_cp_prunes_weak_splits():
    X, y = _regression_data(n=100)
    loose = build_cart(X, y, 0, min_split=2, min_leaf=1, max_depth=30, cp=0.0)
    tight = build_cart(X, y, 0, min_split=2, min_leaf=1, max_depth=30, cp=0.5)
    assert tight.n_nodes < loose.n_nodes


def test_forest_bootstrap_differs_per_tree():
    X, y = _regression_data(n=60)
    forest = build_forest(X, y, 0, tree_count=3, mtry=2, seed=0)
    assert len({tuple(t.predict_value(X[:5])) for t in forest}) > 1
