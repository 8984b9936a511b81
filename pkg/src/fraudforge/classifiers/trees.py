"""CART trees, random forests and second-order gradient boosting.

Trees are stored as a flat node table. Internal nodes send a row left when
``x[feature] <= threshold``; leaves have ``feature == -1`` and carry a value
(positive-class fraction for CART, additive log-odds weight for boosting).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..data import Dataset
from ..errors import EmptyData, SingleClass, WidthMismatch
from .linear import _require_both_classes, _sigmoid64

LEAF = -1
_TOL = 1e-12


@dataclass
class DecisionTree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    max_depth: int = 0
    min_samples_leaf: int = 1

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, rows: np.ndarray) -> np.ndarray:
        """Leaf index reached by each row."""
        rows = np.asarray(rows, dtype=np.float64)
        node = np.zeros(len(rows), dtype=np.int64)
        active = np.flatnonzero(self.feature[node] != LEAF)
        while active.size:
            cur = node[active]
            go_left = rows[active, self.feature[cur]] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] != LEAF]
        return node

    def predict(self, rows: np.ndarray) -> np.ndarray:
        return self.value[self.apply(rows)]

    def to_table(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": self.threshold.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": self.value.tolist(),
            "max_depth": self.max_depth,
            "min_samples_leaf": self.min_samples_leaf,
        }

    @classmethod
    def from_table(cls, t: dict) -> "DecisionTree":
        return cls(
            np.array(t["feature"], dtype=np.int64),
            np.array(t["threshold"], dtype=np.float64),
            np.array(t["left"], dtype=np.int64),
            np.array(t["right"], dtype=np.int64),
            np.array(t["value"], dtype=np.float64),
            int(t["max_depth"]),
            int(t["min_samples_leaf"]),
        )


class _TreeBuilder:
    def __init__(self):
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def add(self, value: float) -> int:
        self.feature.append(LEAF)
        self.threshold.append(0.0)
        self.left.append(LEAF)
        self.right.append(LEAF)
        self.value.append(float(value))
        return len(self.feature) - 1

    def split(self, node: int, feature: int, threshold: float, left: int, right: int) -> None:
        self.feature[node] = feature
        self.threshold[node] = threshold
        self.left[node] = left
        self.right[node] = right

    def finish(self, max_depth: int, min_samples_leaf: int) -> DecisionTree:
        return DecisionTree(
            np.array(self.feature, dtype=np.int64),
            np.array(self.threshold, dtype=np.float64),
            np.array(self.left, dtype=np.int64),
            np.array(self.right, dtype=np.int64),
            np.array(self.value, dtype=np.float64),
            max_depth,
            min_samples_leaf,
        )


def _candidates(xs_sorted: np.ndarray, min_leaf: int) -> np.ndarray:
    """Positions i such that splitting after sorted row i separates distinct values."""
    n = len(xs_sorted)
    pos = np.flatnonzero(xs_sorted[:-1] < xs_sorted[1:])
    return pos[(pos + 1 >= min_leaf) & (n - pos - 1 >= min_leaf)]


def _midpoint(lo: float, hi: float) -> float:
    mid = 0.5 * (lo + hi)
    return lo if mid >= hi else mid


def presort(x: np.ndarray) -> list[np.ndarray]:
    """Stable argsort of every column, computed once per tree."""
    return [np.argsort(x[:, f], kind="stable") for f in range(x.shape[1])]


def _node_order(order: np.ndarray, idx: np.ndarray, n: int) -> np.ndarray:
    # restricting a stable global order to idx equals a stable sort of idx
    member = np.zeros(n, dtype=bool)
    member[idx] = True
    return order[member[order]]


def gini(labels: np.ndarray) -> float:
    if len(labels) == 0:
        return 0.0
    p = float(np.mean(labels))
    return 2.0 * p * (1.0 - p)


_TIE = 1e-12


def best_gini_split(x: np.ndarray, y: np.ndarray, features, min_leaf: int = 1, orders=None):
    """Lowest weighted-Gini split over ``features`` and midpoint thresholds.

    Returns ``(weighted_gini, feature, threshold)`` or ``None``. Ties go to
    the lowest feature index, then the lowest threshold. ``orders`` holds
    precomputed stable row orders per feature.
    """
    best = None
    for f in sorted(features):
        order = np.argsort(x[:, f], kind="stable") if orders is None else orders[f]
        n = len(order)
        xs = x[order, f]
        pos = _candidates(xs, min_leaf)
        if pos.size == 0:
            continue
        cum = np.cumsum(y[order], dtype=np.float64)
        n_left = pos + 1.0
        n_right = n - n_left
        p_left = cum[pos] / n_left
        p_right = (cum[-1] - cum[pos]) / n_right
        weighted = (n_left * 2 * p_left * (1 - p_left) + n_right * 2 * p_right * (1 - p_right)) / n
        # ties within rounding noise keep the earliest candidate
        j = int(np.argmax(weighted <= weighted.min() + _TIE))
        if best is None or weighted[j] < best[0] - _TIE:
            best = (float(weighted[j]), f, _midpoint(xs[pos[j]], xs[pos[j] + 1]))
    return best


def tree_train(
    d: Dataset,
    max_depth: int = 12,
    min_samples_leaf: int = 1,
    feature_subset_size: Optional[int] = None,
    rng: Optional[np.random.Generator] = None,
) -> DecisionTree:
    """Greedy CART classification tree on Gini impurity."""
    return _cart(d.features, d.labels, max_depth, min_samples_leaf, feature_subset_size, rng)


def _cart(x, y, max_depth, min_leaf, m, rng) -> DecisionTree:
    if len(y) == 0:
        raise EmptyData("cannot grow a tree on zero rows")
    y = np.asarray(y, dtype=np.float64)
    p = x.shape[1]
    if m is not None and m < p and rng is None:
        rng = np.random.default_rng(0)
    n = len(y)
    orders = presort(x)
    b = _TreeBuilder()
    stack = [(b.add(y.mean()), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        ys = y[idx]
        impurity = gini(ys)
        if depth >= max_depth or impurity == 0.0 or len(idx) < 2 * min_leaf:
            continue
        feats = range(p) if m is None or m >= p else rng.choice(p, size=m, replace=False)
        node_orders = {f: _node_order(orders[f], idx, n) for f in feats}
        found = best_gini_split(x, y, feats, min_leaf, node_orders)
        if found is None or found[0] >= impurity - _TOL:
            continue
        _, f, thr = found
        mask = x[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = b.add(y[li].mean())
        right = b.add(y[ri].mean())
        b.split(node, f, thr, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.finish(max_depth, min_leaf)


# -- random forest -------------------------------------------------------------
@dataclass
class RandomForestModel:
    trees: list[DecisionTree]
    seed: int  # tree i was grown from default_rng([seed, i])
    max_features: Optional[int]
    n_features: int

    kind = "rf"

    def score(self, rows) -> np.ndarray:
        if not self.trees:
            raise ValueError("random forest has no trees")
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise WidthMismatch(f"expected {self.n_features} columns, got {rows.shape}")
        total = np.zeros(len(rows))
        for t in self.trees:
            total += t.predict(rows)
        return total / len(self.trees)


def default_max_features(p: int) -> int:
    return max(1, int(math.floor(math.sqrt(p))))


def rf_train(
    d: Dataset,
    n_trees: int = 100,
    max_depth: int = 12,
    max_features: Optional[int] = -1,
    seed: int = 0,
    min_samples_leaf: int = 1,
    bootstrap: bool = True,
) -> RandomForestModel:
    """Bagged CART trees with per-split feature subsampling.

    ``max_features=-1`` means floor(sqrt(p)); ``None`` disables subsampling.
    Tree ``i`` draws from ``default_rng([seed, i])``, so results do not
    depend on training order.
    """
    _require_both_classes(d.labels)
    if n_trees < 1:
        raise ValueError("n_trees must be >= 1")
    n, p = d.features.shape
    m = default_max_features(p) if max_features == -1 else max_features
    trees = []
    for i in range(n_trees):
        rng = np.random.default_rng([seed, i])
        idx = rng.integers(0, n, size=n) if bootstrap else np.arange(n)
        trees.append(_cart(d.features[idx], d.labels[idx], max_depth, min_samples_leaf, m, rng))
    return RandomForestModel(trees, seed, m, p)


# -- gradient boosting ---------------------------------------------------------
@dataclass
class GbtModel:
    trees: list[DecisionTree]
    learning_rate: float
    base_score: float
    l2: float
    n_features: int

    kind = "gbt"

    def margin(self, rows) -> np.ndarray:
        rows = np.asarray(rows, dtype=np.float64)
        if rows.ndim != 2 or rows.shape[1] != self.n_features:
            raise WidthMismatch(f"expected {self.n_features} columns, got {rows.shape}")
        out = np.full(len(rows), self.base_score)
        for t in self.trees:
            out += self.learning_rate * t.predict(rows)
        return out

    def score(self, rows) -> np.ndarray:
        return _sigmoid64(self.margin(rows))


def leaf_weight(g_sum: float, h_sum: float, l2: float) -> float:
    return -g_sum / (h_sum + l2)


def split_gain(gl, hl, gr, hr, l2):
    return 0.5 * (gl**2 / (hl + l2) + gr**2 / (hr + l2) - (gl + gr) ** 2 / (hl + hr + l2))


def best_gain_split(x, g, h, l2, min_leaf: int = 1, min_child_weight: float = 0.0, orders=None):
    """Highest second-order gain; returns ``(gain, feature, threshold)`` or ``None``.

    Candidates leaving either child with hessian sum below
    ``min_child_weight`` are skipped. ``orders`` restricts the search to
    the listed rows, given in stable sorted order per feature.
    """
    best = None
    if orders is None:
        orders = presort(x)
    gt, ht = g[orders[0]].sum(), h[orders[0]].sum()
    for f in range(x.shape[1]):
        order = orders[f]
        xs = x[order, f]
        pos = _candidates(xs, min_leaf)
        if pos.size == 0:
            continue
        gl = np.cumsum(g[order])[pos]
        hl = np.cumsum(h[order])[pos]
        gain = split_gain(gl, hl, gt - gl, ht - hl, l2)
        gain[(hl < min_child_weight) | (ht - hl < min_child_weight)] = -np.inf
        top = gain.max()
        if not np.isfinite(top):
            continue
        tol = _TIE * max(1.0, abs(top))
        j = int(np.argmax(gain >= top - tol))
        if best is None or gain[j] > best[0] + tol:
            best = (float(gain[j]), f, _midpoint(xs[pos[j]], xs[pos[j] + 1]))
    return best


def regression_tree(
    x, g, h, max_depth: int, l2: float, min_leaf: int = 1, min_child_weight: float = 0.0, orders=None
) -> DecisionTree:
    n = len(g)
    orders = presort(x) if orders is None else orders
    b = _TreeBuilder()
    stack = [(b.add(leaf_weight(g.sum(), h.sum(), l2)), np.arange(n), 0)]
    while stack:
        node, idx, depth = stack.pop()
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            continue
        node_orders = [_node_order(o, idx, n) for o in orders]
        found = best_gain_split(x, g, h, l2, min_leaf, min_child_weight, node_orders)
        if found is None or found[0] <= _TOL:
            continue
        _, f, thr = found
        mask = x[idx, f] <= thr
        li, ri = idx[mask], idx[~mask]
        left = b.add(leaf_weight(g[li].sum(), h[li].sum(), l2))
        right = b.add(leaf_weight(g[ri].sum(), h[ri].sum(), l2))
        b.split(node, f, thr, left, right)
        stack.append((right, ri, depth + 1))
        stack.append((left, li, depth + 1))
    return b.finish(max_depth, min_leaf)


def log_loss(y: np.ndarray, p: np.ndarray, eps: float = 1e-12) -> float:
    p = np.clip(p, eps, 1 - eps)
    return float(-np.mean(y * np.log(p) + (1 - y) * np.log(1 - p)))


def gbt_train(
    d: Dataset,
    n_rounds: int = 200,
    learning_rate: float = 0.1,
    max_depth: int = 4,
    l2: float = 1.0,
    seed: int = 0,
    min_samples_leaf: int = 1,
    min_child_weight: float = 1.0,
) -> GbtModel:
    """Log-loss boosting with Newton leaf weights ``-G / (H + l2)``.

    A split must leave hessian mass ``>= min_child_weight`` on both sides.
    Every round uses all rows and features, so ``seed`` has no effect.
    """
    _require_both_classes(d.labels)
    x = d.features
    y = d.labels.astype(np.float64)
    rate = float(np.clip(y.mean(), 1e-6, 1 - 1e-6))
    base = math.log(rate / (1 - rate))
    margin = np.full(len(y), base)
    orders = presort(x)
    trees = []
    for _ in range(n_rounds):
        p = _sigmoid64(margin)
        g = p - y
        h = p * (1 - p)
        tree = regression_tree(x, g, h, max_depth, l2, min_samples_leaf, min_child_weight, orders)
        trees.append(tree)
        margin += learning_rate * tree.predict(x)
    return GbtModel(trees, learning_rate, base, l2, x.shape[1])


def ensemble_predict(model, rows) -> np.ndarray:
    return model.score(rows)
