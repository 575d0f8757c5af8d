"""Exact greedy CART regression trees."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from numba import njit

from gapaudit.learn.rng import Rng, next_below

LEAF = -1


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None  # None = grow until leaf-size limits stop it
    min_samples_leaf: int = 1
    min_samples_split: int = 2

    def __post_init__(self):
        if self.max_depth is not None and self.max_depth < 0:
            raise ValueError("max_depth must be >= 0 or None")
        if self.min_samples_leaf < 1 or self.min_samples_split < 2:
            raise ValueError("min_samples_leaf >= 1 and min_samples_split >= 2 required")

    def to_json(self) -> dict:
        return asdict(self)


@njit(cache=True)
def _presort(X, active):
    p = X.shape[1]
    m = active.shape[0]
    order = np.empty((p, m), dtype=np.int64)
    for f in range(p):
        vals = X[active, f]
        perm = np.argsort(vals, kind="mergesort")
        for i in range(m):
            order[f, i] = active[perm[i]]
    return order


@njit(cache=True)
def _build(X, y, w, order, max_depth, min_split, min_leaf, max_features, rng_state):
    p = X.shape[1]
    m = order.shape[1]
    cap = 2 * m + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap, dtype=np.float64)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap, dtype=np.float64)
    cover = np.zeros(cap, dtype=np.float64)
    gain = np.zeros(cap, dtype=np.float64)

    goes_left = np.zeros(X.shape[0], dtype=np.bool_)
    buf = np.empty(m, dtype=np.int64)
    feats = np.arange(p, dtype=np.int64)

    # stack entries: start, end, depth, parent, is_left
    st_start = np.empty(cap, dtype=np.int64)
    st_end = np.empty(cap, dtype=np.int64)
    st_depth = np.empty(cap, dtype=np.int64)
    st_parent = np.empty(cap, dtype=np.int64)
    st_left = np.empty(cap, dtype=np.bool_)
    top = 0
    st_start[0] = 0
    st_end[0] = m
    st_depth[0] = 0
    st_parent[0] = -1
    st_left[0] = True
    top = 1
    n_nodes = 0

    while top > 0:
        top -= 1
        start = st_start[top]
        end = st_end[top]
        depth = st_depth[top]
        node = n_nodes
        n_nodes += 1
        parent = st_parent[top]
        if parent >= 0:
            if st_left[top]:
                left[parent] = node
            else:
                right[parent] = node

        W = 0.0
        S = 0.0
        ymin = np.inf
        ymax = -np.inf
        for k in range(start, end):
            i = order[0, k]
            W += w[i]
            S += w[i] * y[i]
            if y[i] < ymin:
                ymin = y[i]
            if y[i] > ymax:
                ymax = y[i]
        mean = S / W
        value[node] = mean
        cover[node] = W

        if (max_depth >= 0 and depth >= max_depth) or W < min_split or W < 2.0 * min_leaf or ymin == ymax:
            continue

        sse = 0.0
        for k in range(start, end):
            i = order[0, k]
            sse += w[i] * (y[i] - mean) ** 2

        if max_features < p:
            # partial Fisher-Yates, then ascending so ties favour low indices
            for j in range(p):
                feats[j] = j
            for j in range(max_features):
                r = j + next_below(rng_state, p - j)
                tmp = feats[j]
                feats[j] = feats[r]
                feats[r] = tmp
            cand = np.sort(feats[:max_features])
        else:
            cand = feats

        best_gain = 0.0
        best_f = -1
        best_thr = 0.0
        for f in cand:
            wl = 0.0
            sl = 0.0
            for k in range(start, end - 1):
                i = order[f, k]
                wl += w[i]
                sl += w[i] * y[i]
                xa = X[i, f]
                xb = X[order[f, k + 1], f]
                if xb == xa:
                    continue
                wr = W - wl
                if wl < min_leaf or wr < min_leaf:
                    continue
                d = sl / wl - (S - sl) / wr
                g = wl * wr / W * d * d
                if g > best_gain:
                    best_gain = g
                    best_f = f
                    thr = 0.5 * (xa + xb)
                    if thr >= xb:
                        thr = xa
                    best_thr = thr

        if best_f < 0 or best_gain <= 1e-12 * sse:
            continue

        feature[node] = best_f
        threshold[node] = best_thr
        gain[node] = best_gain

        for k in range(start, end):
            i = order[best_f, k]
            goes_left[i] = X[i, best_f] <= best_thr
        n_left = 0
        for f in range(p):
            a = 0
            b = 0
            for k in range(start, end):
                i = order[f, k]
                if goes_left[i]:
                    order[f, start + a] = i
                    a += 1
                else:
                    buf[b] = i
                    b += 1
            for k in range(b):
                order[f, start + a + k] = buf[k]
            n_left = a
        mid = start + n_left

        # right pushed first so the left subtree is numbered next (preorder)
        st_start[top] = mid
        st_end[top] = end
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_left[top] = False
        top += 1
        st_start[top] = start
        st_end[top] = mid
        st_depth[top] = depth + 1
        st_parent[top] = node
        st_left[top] = True
        top += 1

    return (
        feature[:n_nodes].copy(),
        threshold[:n_nodes].copy(),
        left[:n_nodes].copy(),
        right[:n_nodes].copy(),
        value[:n_nodes].copy(),
        cover[:n_nodes].copy(),
        gain[:n_nodes].copy(),
    )


@njit(cache=True)
def _predict(feature, threshold, left, right, value, X):
    out = np.empty(X.shape[0], dtype=np.float64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@njit(cache=True)
def _apply(feature, threshold, left, right, X):
    out = np.empty(X.shape[0], dtype=np.int64)
    for r in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = node
    return out


class RegressionTree:
    """Array-backed binary tree; node 0 is the root, leaves have feature -1.

    ``cover`` is the training weight reaching each node, which the SHAP
    routines need for marginalisation.
    """

    def __init__(self, feature, threshold, left, right, value, cover, gain=None, n_features: int | None = None):
        self.feature = np.ascontiguousarray(feature, dtype=np.int64)
        self.threshold = np.ascontiguousarray(threshold, dtype=np.float64)
        self.left = np.ascontiguousarray(left, dtype=np.int64)
        self.right = np.ascontiguousarray(right, dtype=np.int64)
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.cover = None if cover is None else np.ascontiguousarray(cover, dtype=np.float64)
        self.gain = np.zeros(len(self.feature)) if gain is None else np.ascontiguousarray(gain, dtype=np.float64)
        n = len(self.feature)
        if not (len(self.threshold) == len(self.left) == len(self.right) == len(self.value) == n):
            raise ValueError("node arrays must have equal length")
        self.n_features = int(n_features) if n_features is not None else int(self.feature.max(initial=-1) + 1)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    @property
    def depth(self) -> int:
        best = 0
        stack = [(0, 0)]
        while stack:
            node, d = stack.pop()
            best = max(best, d)
            if self.feature[node] >= 0:
                stack.append((self.left[node], d + 1))
                stack.append((self.right[node], d + 1))
        return best

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] < 0

    def predict(self, X) -> np.ndarray:
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _predict(self.feature, self.threshold, self.left, self.right, self.value, X)

    def apply(self, X) -> np.ndarray:
        """Leaf index reached by each row."""
        X = np.ascontiguousarray(X, dtype=np.float64)
        return _apply(self.feature, self.threshold, self.left, self.right, X)

    def expected_value(self) -> float:
        """Cover-weighted mean of the leaf values."""
        if self.cover is None:
            raise ValueError("tree not SHAP-ready: missing covers")
        leaves = self.feature < 0
        return float(np.dot(self.cover[leaves], self.value[leaves]) / self.cover[0])

    def feature_gains(self, p: int | None = None) -> np.ndarray:
        p = self.n_features if p is None else p
        out = np.zeros(p)
        internal = self.feature >= 0
        np.add.at(out, self.feature[internal], self.gain[internal])
        return out

    def to_json(self) -> dict:
        nodes = []
        for i in range(self.n_nodes):
            nodes.append(
                {
                    "f": int(self.feature[i]),
                    "t": float(self.threshold[i]),
                    "l": int(self.left[i]),
                    "r": int(self.right[i]),
                    "v": float(self.value[i]),
                    "cover": None if self.cover is None else float(self.cover[i]),
                }
            )
        return {"n_features": self.n_features, "nodes": nodes}

    @classmethod
    def from_json(cls, obj: dict) -> "RegressionTree":
        nodes = obj["nodes"]
        covers = [n.get("cover") for n in nodes]
        return cls(
            [n["f"] for n in nodes],
            [n["t"] for n in nodes],
            [n["l"] for n in nodes],
            [n["r"] for n in nodes],
            [n["v"] for n in nodes],
            None if any(c is None for c in covers) else covers,
            n_features=obj.get("n_features"),
        )


def presort(X: np.ndarray, active=None) -> np.ndarray:
    X = np.ascontiguousarray(X, dtype=np.float64)
    if active is None:
        active = np.arange(X.shape[0], dtype=np.int64)
    return _presort(X, np.asarray(active, dtype=np.int64))


def fit_tree(
    X,
    y,
    params: TreeParams | None = None,
    row_weights=None,
    max_features: int | None = None,
    rng: Rng | None = None,
    order: np.ndarray | None = None,
) -> RegressionTree:
    """Grow one tree by exhaustive midpoint search on weighted variance reduction.

    Rows with zero weight are ignored. ``max_features`` < p draws a random
    feature subset at every split from ``rng``. ``order`` may carry a
    presorted index matrix for the active rows; it is modified in place.
    """
    params = params or TreeParams()
    X = np.ascontiguousarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    n, p = X.shape
    if y.shape != (n,):
        raise ValueError("y must have one value per row")
    if not (np.isfinite(X).all() and np.isfinite(y).all()):
        raise ValueError("non-finite training data")
    w = np.ones(n) if row_weights is None else np.ascontiguousarray(row_weights, dtype=np.float64)
    if order is None:
        order = presort(X, np.flatnonzero(w > 0))
    if order.shape[1] == 0:
        raise ValueError("no rows with positive weight")
    k = p if max_features is None else int(max_features)
    if not 1 <= k <= p:
        raise ValueError("max_features must lie in [1, p]")
    state = (rng or Rng(0)).state
    max_depth = -1 if params.max_depth is None else int(params.max_depth)
    arrays = _build(X, y, w, order, max_depth, float(params.min_samples_split), float(params.min_samples_leaf), k, state)
    return RegressionTree(*arrays, n_features=p)
