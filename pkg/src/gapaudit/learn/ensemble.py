"""Random forests and squared-loss gradient boosting over :class:`RegressionTree`."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np

from gapaudit.learn.rng import Rng, derive_seed
from gapaudit.learn.tree import RegressionTree, TreeParams, fit_tree, presort


@dataclass(frozen=True)
class ForestParams:
    n_estimators: int = 100
    tree: TreeParams = field(default_factory=TreeParams)
    bootstrap: bool = True
    feature_subsample_count: int | None = None  # None -> max(1, p // 3)
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class GbtParams:
    n_estimators: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = 3
    min_samples_leaf: int = 1
    seed: int = 42

    def __post_init__(self):
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if not 0 < self.learning_rate <= 1:
            raise ValueError("learning_rate must lie in (0, 1]")

    def to_json(self) -> dict:
        return asdict(self)


class Ensemble:
    """Forest average (``forest_average``) or boosted sum (``boosted_sum``) of trees."""

    def __init__(self, kind: str, trees: list[RegressionTree], base_value: float = 0.0, learning_rate: float = 1.0, params=None):
        if kind not in ("forest_average", "boosted_sum"):
            raise ValueError(f"unknown ensemble kind {kind!r}")
        self.kind = kind
        self.trees = list(trees)
        self.base_value = float(base_value)
        self.learning_rate = float(learning_rate)
        self.params = params
        self.train_loss: list[float] = []

    @property
    def n_features(self) -> int:
        return max(t.n_features for t in self.trees)

    def tree_weights(self) -> np.ndarray:
        if self.kind == "forest_average":
            return np.full(len(self.trees), 1.0 / len(self.trees))
        return np.full(len(self.trees), self.learning_rate)

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        out = np.full(X.shape[0], self.base_value)
        if self.kind == "forest_average":
            acc = np.zeros(X.shape[0])
            for t in self.trees:
                acc += t.predict(X)
            return out + acc / len(self.trees)
        for t in self.trees:
            out += self.learning_rate * t.predict(X)
        return out

    def feature_gains(self, p: int | None = None) -> np.ndarray:
        p = self.n_features if p is None else p
        total = np.zeros(p)
        for t in self.trees:
            total += t.feature_gains(p)
        return total

    def to_json(self) -> dict:
        params = self.params.to_json() if hasattr(self.params, "to_json") else self.params
        return {
            "kind": self.kind,
            "params": params,
            "base_value": self.base_value,
            "learning_rate": self.learning_rate,
            "trees": [t.to_json() for t in self.trees],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Ensemble":
        trees = [RegressionTree.from_json(t) for t in obj["trees"]]
        return cls(obj["kind"], trees, obj["base_value"], obj.get("learning_rate", 1.0), obj.get("params"))


def fit_forest(X, y, params: ForestParams | None = None) -> Ensemble:
    """Bagged trees with per-split feature subsampling; tree ``i`` uses seed ``seed ^ i``."""
    params = params or ForestParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    k = params.feature_subsample_count or max(1, p // 3)
    k = min(k, p)
    full_order = presort(X)
    trees = []
    for i in range(params.n_estimators):
        rng = Rng(derive_seed(params.seed, i))
        if params.bootstrap:
            w = rng.bootstrap(n)
            order = np.ascontiguousarray(full_order[w[full_order] > 0].reshape(p, -1))
        else:
            w = np.ones(n)
            order = full_order.copy()
        trees.append(fit_tree(X, y, params.tree, row_weights=w, max_features=k, rng=rng, order=order))
    return Ensemble("forest_average", trees, base_value=0.0, params=params)


def fit_gbt(X, y, params: GbtParams | None = None) -> Ensemble:
    """Squared-loss boosting: start from mean(y), fit each tree to the current residuals."""
    params = params or GbtParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    tp = TreeParams(max_depth=params.max_depth, min_samples_leaf=params.min_samples_leaf)
    base = float(np.mean(y))
    F = np.full(y.shape[0], base)
    order0 = presort(X)
    trees = []
    losses = [float(np.mean((y - F) ** 2))]
    for i in range(params.n_estimators):
        tree = fit_tree(X, y - F, tp, order=order0.copy())
        F += params.learning_rate * tree.predict(X)
        trees.append(tree)
        losses.append(float(np.mean((y - F) ** 2)))
    model = Ensemble("boosted_sum", trees, base_value=base, learning_rate=params.learning_rate, params=params)
    model.train_loss = losses
    return model
