"""Exact TreeSHAP attributions, a subset-enumeration oracle, and global rankings."""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import combinations

import numpy as np
from numba import njit

from gapaudit.learn.ensemble import Ensemble
from gapaudit.learn.tree import RegressionTree

BRUTE_FORCE_MAX_FEATURES = 20


class NotShapReady(ValueError):
    pass


@dataclass
class ShapExplanation:
    feature_names: list[str]
    phi: np.ndarray
    base_value: float
    prediction: float

    @property
    def additivity_residual(self) -> float:
        return float(self.base_value + self.phi.sum() - self.prediction)

    def to_json(self) -> dict:
        return {
            "phi": [float(v) for v in self.phi],
            "base_value": self.base_value,
            "prediction": self.prediction,
            "additivity_residual": self.additivity_residual,
        }


@dataclass
class GlobalImportance:
    ranking: list[tuple[str, float]]

    def to_json(self) -> list[dict]:
        return [{"feature": f, "mean_abs_phi": v} for f, v in self.ranking]


# Path-tracking recursion (Lundberg et al., "Consistent individualized feature
# attribution for tree ensembles", Algorithm 2). Each recursion level owns a
# slice of the path arrays starting at ``off``; children get ``off + depth + 1``.


@njit(cache=True)
def _extend(pf, pz, po, pw, off, depth, zero_frac, one_frac, feat):
    pf[off + depth] = feat
    pz[off + depth] = zero_frac
    po[off + depth] = one_frac
    pw[off + depth] = 1.0 if depth == 0 else 0.0
    for i in range(depth - 1, -1, -1):
        pw[off + i + 1] += one_frac * pw[off + i] * (i + 1) / (depth + 1)
        pw[off + i] = zero_frac * pw[off + i] * (depth - i) / (depth + 1)


@njit(cache=True)
def _unwind(pf, pz, po, pw, off, depth, idx):
    one_frac = po[off + idx]
    zero_frac = pz[off + idx]
    next_one = pw[off + depth]
    for i in range(depth - 1, -1, -1):
        if one_frac != 0.0:
            tmp = pw[off + i]
            pw[off + i] = next_one * (depth + 1) / ((i + 1) * one_frac)
            next_one = tmp - pw[off + i] * zero_frac * (depth - i) / (depth + 1)
        else:
            pw[off + i] = pw[off + i] * (depth + 1) / (zero_frac * (depth - i))
    for i in range(idx, depth):
        pf[off + i] = pf[off + i + 1]
        pz[off + i] = pz[off + i + 1]
        po[off + i] = po[off + i + 1]


@njit(cache=True)
def _unwound_sum(pz, po, pw, off, depth, idx):
    one_frac = po[off + idx]
    zero_frac = pz[off + idx]
    next_one = pw[off + depth]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one_frac != 0.0:
            tmp = next_one * (depth + 1) / ((i + 1) * one_frac)
            total += tmp
            next_one = pw[off + i] - tmp * zero_frac * (depth - i) / (depth + 1)
        else:
            total += pw[off + i] / (zero_frac * (depth - i) / (depth + 1))
    return total


# Not cached: numba's on-disk cache mis-links self-recursive functions and the
# reloaded kernel segfaults.
@njit
def _recurse(feature, threshold, left, right, value, cover, x, phi, scale, pf, pz, po, pw, node, parent_off, off, depth, zero_frac, one_frac, feat):
    for i in range(depth):
        pf[off + i] = pf[parent_off + i]
        pz[off + i] = pz[parent_off + i]
        po[off + i] = po[parent_off + i]
        pw[off + i] = pw[parent_off + i]
    _extend(pf, pz, po, pw, off, depth, zero_frac, one_frac, feat)

    f = feature[node]
    if f < 0:
        for i in range(1, depth + 1):
            w = _unwound_sum(pz, po, pw, off, depth, i)
            phi[pf[off + i]] += scale * w * (po[off + i] - pz[off + i]) * value[node]
        return

    if x[f] <= threshold[node]:
        hot = left[node]
        cold = right[node]
    else:
        hot = right[node]
        cold = left[node]
    hot_zero = cover[hot] / cover[node]
    cold_zero = cover[cold] / cover[node]
    in_zero = 1.0
    in_one = 1.0

    k = 0
    while k <= depth:
        if pf[off + k] == f:
            break
        k += 1
    if k != depth + 1:
        in_zero = pz[off + k]
        in_one = po[off + k]
        _unwind(pf, pz, po, pw, off, depth, k)
        depth -= 1

    child_off = off + depth + 1
    _recurse(feature, threshold, left, right, value, cover, x, phi, scale, pf, pz, po, pw, hot, off, child_off, depth + 1, hot_zero * in_zero, in_one, f)
    _recurse(feature, threshold, left, right, value, cover, x, phi, scale, pf, pz, po, pw, cold, off, child_off, depth + 1, cold_zero * in_zero, 0.0, f)


@njit
def _tree_shap_rows(feature, threshold, left, right, value, cover, max_depth, X, phi, scale):
    size = (max_depth + 2) * (max_depth + 3) // 2 + 1
    pf = np.zeros(size, dtype=np.int64)
    pz = np.zeros(size)
    po = np.zeros(size)
    pw = np.zeros(size)
    for r in range(X.shape[0]):
        _recurse(feature, threshold, left, right, value, cover, X[r], phi[r], scale, pf, pz, po, pw, 0, 0, 0, 0, 1.0, 1.0, -1)


def _check_ready(tree: RegressionTree) -> None:
    if tree.cover is None or not np.all(tree.cover > 0):
        raise NotShapReady("tree not SHAP-ready: missing or non-positive covers")


def _accumulate(tree: RegressionTree, X: np.ndarray, phi: np.ndarray, scale: float) -> None:
    _check_ready(tree)
    if tree.n_nodes == 1:
        return
    _tree_shap_rows(tree.feature, tree.threshold, tree.left, tree.right, tree.value, tree.cover, tree.depth, X, phi, scale)


def tree_shap(tree: RegressionTree, x, n_features: int | None = None) -> np.ndarray:
    """Exact path-dependent Shapley values of one tree for one input row."""
    x = np.asarray(x, dtype=np.float64)
    p = n_features or x.shape[0]
    phi = np.zeros((1, p))
    _accumulate(tree, np.ascontiguousarray(x.reshape(1, -1)), phi, 1.0)
    return phi[0]


def tree_shap_matrix(tree: RegressionTree, X) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    phi = np.zeros(X.shape)
    _accumulate(tree, X, phi, 1.0)
    return phi


def conditional_expectation(tree: RegressionTree, x, subset) -> float:
    """v(S): follow ``x`` on features in ``subset``, average children by cover elsewhere."""
    if tree.cover is None:
        raise NotShapReady("tree not SHAP-ready: missing covers")
    subset = set(subset)

    def walk(node: int) -> float:
        f = tree.feature[node]
        if f < 0:
            return float(tree.value[node])
        l, r = tree.left[node], tree.right[node]
        if f in subset:
            return walk(l if x[f] <= tree.threshold[node] else r)
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / tree.cover[node]

    return walk(0)


def brute_force_shap(tree: RegressionTree, x, n_features: int | None = None) -> np.ndarray:
    """Shapley values by enumerating every coalition; exponential, for testing."""
    x = np.asarray(x, dtype=float)
    p = n_features or x.shape[0]
    if p > BRUTE_FORCE_MAX_FEATURES:
        raise ValueError(f"brute-force Shapley limited to {BRUTE_FORCE_MAX_FEATURES} features, got {p}")
    cache: dict[frozenset, float] = {}

    def v(s: frozenset) -> float:
        if s not in cache:
            cache[s] = conditional_expectation(tree, x, s)
        return cache[s]

    phi = np.zeros(p)
    fact = [math.factorial(k) for k in range(p + 1)]
    for i in range(p):
        others = [j for j in range(p) if j != i]
        for size in range(p):
            weight = fact[size] * fact[p - size - 1] / fact[p]
            for combo in combinations(others, size):
                s = frozenset(combo)
                phi[i] += weight * (v(s | {i}) - v(s))
    return phi


def ensemble_shap_matrix(model, X) -> tuple[np.ndarray, np.ndarray]:
    """(phi rows, base values) for every row of ``X``."""
    X = np.ascontiguousarray(X, dtype=np.float64)
    phi = np.zeros(X.shape)
    if isinstance(model, RegressionTree):
        _accumulate(model, X, phi, 1.0)
        return phi, np.full(X.shape[0], model.expected_value())
    if not isinstance(model, Ensemble):
        raise TypeError("SHAP attribution needs a tree or tree ensemble")
    weights = model.tree_weights()
    base = model.base_value
    for tree, w in zip(model.trees, weights):
        _accumulate(tree, X, phi, float(w))
        base += w * tree.expected_value()
    return phi, np.full(X.shape[0], base)


def ensemble_shap(model, x, feature_names=None) -> ShapExplanation:
    x = np.asarray(x, dtype=np.float64).reshape(1, -1)
    phi, base = ensemble_shap_matrix(model, x)
    names = list(feature_names) if feature_names is not None else [f"f{i}" for i in range(x.shape[1])]
    return ShapExplanation(names, phi[0], float(base[0]), float(model.predict(x)[0]))


def explain_rows(model, X, feature_names) -> list[ShapExplanation]:
    X = np.ascontiguousarray(X, dtype=np.float64)
    phi, base = ensemble_shap_matrix(model, X)
    pred = model.predict(X)
    names = list(feature_names)
    return [ShapExplanation(names, phi[i], float(base[i]), float(pred[i])) for i in range(X.shape[0])]


def global_importance(explanations: list[ShapExplanation]) -> GlobalImportance:
    """Mean |phi| per feature, descending; ties keep column order."""
    if not explanations:
        raise ValueError("no explanations to aggregate")
    names = explanations[0].feature_names
    if any(e.feature_names != names for e in explanations):
        raise ValueError("explanations disagree on feature names")
    mean_abs = np.mean(np.abs(np.stack([e.phi for e in explanations])), axis=0)
    order = sorted(range(len(names)), key=lambda i: (-mean_abs[i], i))
    return GlobalImportance([(names[i], float(mean_abs[i])) for i in order])
