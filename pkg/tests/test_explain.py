import numpy as np
import pytest

from gapaudit.explain import (
    NotShapReady,
    brute_force_shap,
    ensemble_shap,
    explain_rows,
    global_importance,
    tree_shap,
)
from gapaudit.learn.ensemble import Ensemble, ForestParams, GbtParams, fit_forest, fit_gbt
from gapaudit.learn.tree import RegressionTree, TreeParams, fit_tree


def stump():
    return RegressionTree([0, -1, -1], [0.5, 0, 0], [1, -1, -1], [2, -1, -1], [0, 0.0, 1.0], [100, 50, 50], n_features=3)


def test_single_leaf():
    t = RegressionTree([-1], [0.0], [-1], [-1], [2.5], [10.0], n_features=4)
    np.testing.assert_array_equal(tree_shap(t, np.zeros(4)), 0.0)
    np.testing.assert_array_equal(brute_force_shap(t, np.zeros(4)), 0.0)
    assert t.expected_value() == 2.5


def test_stump_example():
    x = np.array([0.7, 0.0, 0.0])
    np.testing.assert_allclose(tree_shap(stump(), x), [0.5, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(brute_force_shap(stump(), x), [0.5, 0.0, 0.0], atol=1e-15)


def test_missing_covers():
    t = RegressionTree([0, -1, -1], [0.5, 0, 0], [1, -1, -1], [2, -1, -1], [0, 0.0, 1.0], None)
    with pytest.raises(NotShapReady, match="not SHAP-ready"):
        tree_shap(t, np.zeros(1))


def test_brute_force_guard():
    t = RegressionTree([-1], [0.0], [-1], [-1], [1.0], [1.0])
    with pytest.raises(ValueError):
        brute_force_shap(t, np.zeros(21))


def test_symmetry():
    # f0 and f1 play identical roles: y = 1 iff both are high
    t = RegressionTree(
        [0, -1, 1, -1, -1],
        [0.5, 0, 0.5, 0, 0],
        [1, -1, 3, -1, -1],
        [2, -1, 4, -1, -1],
        [0, 0.0, 0, 0.0, 1.0],
        [4, 2, 2, 1, 1],
        n_features=2,
    )
    x = np.array([1.0, 1.0])
    phi = tree_shap(t, x)
    assert phi[0] == pytest.approx(phi[1], abs=1e-15)
    np.testing.assert_allclose(brute_force_shap(t, x), phi, atol=1e-15)


def test_random_trees_match_oracle(tree_factory):
    rng = np.random.default_rng(11)
    for _ in range(25):
        p = int(rng.integers(1, 9))
        t = tree_factory(rng, p, int(rng.integers(1, 5)))
        for x in rng.uniform(-1.2, 1.2, size=(8, p)):
            phi = tree_shap(t, x)
            np.testing.assert_allclose(phi, brute_force_shap(t, x), rtol=0, atol=1e-9)
            assert t.expected_value() + phi.sum() == pytest.approx(t.predict(x[None])[0], abs=1e-12)


def test_dummy_feature_zero(tree_factory):
    rng = np.random.default_rng(12)
    t = tree_factory(rng, 5, 4)
    unused = set(range(6)) - set(t.feature[t.feature >= 0].tolist())
    phi = tree_shap(t, rng.uniform(-1, 1, 6), n_features=6)
    for j in unused:
        assert phi[j] == 0.0


@pytest.fixture(scope="module")
def data():
    rng = np.random.default_rng(13)
    X = rng.uniform(-1, 1, size=(200, 5))
    y = 3 * X[:, 0] + 0.5 * X[:, 1] * X[:, 2] + 0.1 * rng.normal(size=200)
    return X, y


def test_forest_additivity(data):
    X, y = data
    f = fit_forest(X, y, ForestParams(n_estimators=15, tree=TreeParams(max_depth=None)))
    for e in explain_rows(f, X[:50], [f"f{i}" for i in range(5)]):
        assert abs(e.additivity_residual) <= 1e-8


def test_gbt_additivity(data):
    X, y = data
    g = fit_gbt(X, y, GbtParams(n_estimators=40, learning_rate=0.2, max_depth=4))
    residuals = [abs(e.additivity_residual) for e in explain_rows(g, X[:50], list("abcde"))]
    assert max(residuals) <= 1e-8


def test_one_tree_forest_equals_tree(data):
    X, y = data
    t = fit_tree(X, y, TreeParams(max_depth=4))
    f = Ensemble("forest_average", [t])
    np.testing.assert_allclose(ensemble_shap(f, X[0]).phi, tree_shap(t, X[0]), atol=1e-15)


def test_duplicating_forest_trees(data):
    X, y = data
    f = fit_forest(X, y, ForestParams(n_estimators=5, tree=TreeParams(max_depth=5)))
    doubled = Ensemble("forest_average", f.trees + f.trees)
    np.testing.assert_allclose(ensemble_shap(doubled, X[1]).phi, ensemble_shap(f, X[1]).phi, atol=1e-14)


def test_boosting_base(data):
    X, y = data
    g = fit_gbt(X, y, GbtParams(n_estimators=5, learning_rate=0.5, max_depth=2))
    e = ensemble_shap(g, X[0])
    assert e.base_value == pytest.approx(g.base_value + sum(0.5 * t.expected_value() for t in g.trees))


def test_global_ranking_signal_first(data):
    X, y = data
    g = fit_gbt(X, y, GbtParams(n_estimators=50, learning_rate=0.2, max_depth=3))
    imp = global_importance(explain_rows(g, X, ["f0", "f1", "f2", "f3", "f4"]))
    assert imp.ranking[0][0] == "f0"
    vals = [v for _, v in imp.ranking]
    assert vals == sorted(vals, reverse=True) and min(vals) >= 0


def test_global_single_and_ties():
    from gapaudit.explain import ShapExplanation

    e = ShapExplanation(["a", "b", "c"], np.array([0.1, -0.3, 0.1]), 0.0, -0.1)
    assert [f for f, _ in global_importance([e]).ranking] == ["b", "a", "c"]
    with pytest.raises(ValueError):
        global_importance([])


def test_ridge_not_explainable(data):
    from gapaudit.learn.linear import fit_ridge

    X, y = data
    with pytest.raises(TypeError):
        explain_rows(fit_ridge(X, y), X[:2], list("abcde"))
