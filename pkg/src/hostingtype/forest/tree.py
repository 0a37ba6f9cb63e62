"""CART classification trees with Gini impurity."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .dataset import Dataset

# impurity decreases closer than this are treated as ties
TIE_TOL = 1e-12


def gini(counts: Sequence[float]) -> float:
    counts = np.asarray(counts, dtype=np.float64)
    total = counts.sum()
    if total <= 0:
        raise ValueError("gini of an empty node")
    p = counts / total
    return float(1.0 - np.sum(p * p))


@dataclass(frozen=True, slots=True)
class Leaf:
    counts: tuple[int, ...]

    @property
    def prediction(self) -> int:
        # argmax picks the lowest index on ties, i.e. the lexicographically first label
        return int(np.argmax(self.counts))


@dataclass(frozen=True, slots=True)
class Split:
    feature: int
    threshold: float
    left: "TreeNode"
    right: "TreeNode"


TreeNode = Union[Leaf, Split]


@dataclass(frozen=True)
class TreeParams:
    max_depth: Optional[int] = None
    min_leaf: int = 1
    mtry: Optional[int] = None  # None: every feature at every node


def _split_scan(x: np.ndarray, y: np.ndarray, n_classes: int, parent: float, min_leaf: int):
    """Impurity decrease and threshold of every admissible cut on one feature."""
    n = x.shape[0]
    order = np.argsort(x, kind="stable")
    xs = x[order]
    onehot = np.zeros((n, n_classes), dtype=np.float64)
    onehot[np.arange(n), y[order]] = 1.0
    left = np.cumsum(onehot, axis=0)[:-1]
    right = left[-1] + onehot[-1] - left
    nl = np.arange(1, n, dtype=np.float64)
    nr = n - nl
    ok = xs[:-1] < xs[1:]
    if min_leaf > 1:
        ok &= (nl >= min_leaf) & (nr >= min_leaf)
    if not ok.any():
        return None
    pos = np.flatnonzero(ok)
    nl, nr, left, right = nl[pos], nr[pos], left[pos], right[pos]
    gl = 1.0 - np.sum((left / nl[:, None]) ** 2, axis=1)
    gr = 1.0 - np.sum((right / nr[:, None]) ** 2, axis=1)
    decrease = parent - (nl * gl + nr * gr) / n
    lo, hi = xs[pos], xs[pos + 1]
    thresholds = (lo + hi) / 2.0
    # a midpoint that rounds onto the upper value would route it left
    thresholds = np.where(thresholds >= hi, lo, thresholds)
    return decrease, thresholds


def _best_split(X: np.ndarray, y: np.ndarray, n_classes: int, features: Sequence[int], min_leaf: int = 1):
    n = X.shape[0]
    if n < 2:
        return None
    parent = gini(np.bincount(y, minlength=n_classes))
    scans = []
    best = -np.inf
    for f in sorted(features):
        res = _split_scan(X[:, f], y, n_classes, parent, min_leaf)
        if res is None:
            continue
        scans.append((f, res))
        best = max(best, float(res[0].max()))
    if not scans or best <= TIE_TOL:
        return None
    for f, (dec, thr) in scans:
        hits = np.flatnonzero(dec >= best - TIE_TOL)
        if hits.size:
            i = hits[np.argmin(thr[hits])]
            return f, float(thr[i]), float(dec[i])
    return None  # pragma: no cover


def best_split(rows, labels, features: Sequence[int] | None = None, min_leaf: int = 1):
    """Exhaustive best Gini split.

    Returns ``(feature, threshold, impurity_decrease)`` or None when no cut
    lowers the impurity.  Ties go to the lower feature index, then the lower
    threshold.
    """
    X = np.asarray(rows, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    _, y = np.unique(np.asarray(labels), return_inverse=True)
    n_classes = int(y.max()) + 1 if y.size else 1
    if features is None:
        features = range(X.shape[1])
    return _best_split(X, y.astype(np.int64), max(n_classes, 1), list(features), min_leaf)


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    params: TreeParams,
    rng: np.random.Generator,
) -> tuple[TreeNode, np.ndarray]:
    """Grow one tree on (X, y); returns the root and raw importance sums.

    At each node ``mtry`` features are drawn without replacement from the
    features that are not constant within the node.
    """
    n_total, d = X.shape
    importance = np.zeros(d, dtype=np.float64)
    mtry = params.mtry

    def build(idx: np.ndarray, depth: int) -> TreeNode:
        yi = y[idx]
        counts = np.bincount(yi, minlength=n_classes)
        n = idx.size
        if (
            np.count_nonzero(counts) <= 1
            or n < 2 * params.min_leaf
            or (params.max_depth is not None and depth >= params.max_depth)
        ):
            return Leaf(tuple(int(c) for c in counts))
        Xi = X[idx]
        varying = np.flatnonzero(Xi.min(axis=0) < Xi.max(axis=0))
        if varying.size == 0:
            return Leaf(tuple(int(c) for c in counts))
        if mtry is not None and mtry < varying.size:
            feats = np.sort(rng.choice(varying, size=mtry, replace=False))
        else:
            feats = varying
        found = _best_split(Xi, yi, n_classes, feats.tolist(), params.min_leaf)
        if found is None:
            return Leaf(tuple(int(c) for c in counts))
        f, thr, dec = found
        importance[f] += dec * n / n_total
        go_left = Xi[:, f] <= thr
        return Split(f, thr, build(idx[go_left], depth + 1), build(idx[~go_left], depth + 1))

    root = build(np.arange(n_total), 0)
    return root, importance


def train_tree(data: Dataset, params: TreeParams | None = None, rng: np.random.Generator | None = None) -> TreeNode:
    params = params or TreeParams()
    rng = rng if rng is not None else np.random.default_rng(0)
    space = data.label_space
    root, _ = grow_tree(data.rows, data.encoded_labels(space), len(space), params, rng)
    return root


def predict_node(node: TreeNode, row: Sequence[float]) -> int:
    while isinstance(node, Split):
        node = node.left if row[node.feature] <= node.threshold else node.right
    return node.prediction


class CompiledTree:
    """Flat-array form of a tree for vectorized prediction."""

    def __init__(self, root: TreeNode):
        feature, threshold, left, right, value = [], [], [], [], []
        stack = [(root, -1, False)]
        while stack:
            node, parent, is_right = stack.pop()
            i = len(feature)
            if parent >= 0:
                (right if is_right else left)[parent] = i
            if isinstance(node, Split):
                feature.append(node.feature)
                threshold.append(node.threshold)
                value.append(-1)
                left.append(-1)
                right.append(-1)
                stack.append((node.right, i, True))
                stack.append((node.left, i, False))
            else:
                feature.append(-1)
                threshold.append(0.0)
                value.append(node.prediction)
                left.append(-1)
                right.append(-1)
        self.feature = np.array(feature, dtype=np.int64)
        self.threshold = np.array(threshold, dtype=np.float64)
        self.left = np.array(left, dtype=np.int64)
        self.right = np.array(right, dtype=np.int64)
        self.value = np.array(value, dtype=np.int64)

    def predict(self, X: np.ndarray) -> np.ndarray:
        n = X.shape[0]
        node = np.zeros(n, dtype=np.int64)
        rows = np.arange(n)
        while True:
            f = self.feature[node]
            inner = f >= 0
            if not inner.any():
                return self.value[node]
            r = rows[inner]
            cur = node[inner]
            go_left = X[r, f[inner]] <= self.threshold[cur]
            node[inner] = np.where(go_left, self.left[cur], self.right[cur])


def tree_depth(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 0
    return 1 + max(tree_depth(node.left), tree_depth(node.right))


def count_nodes(node: TreeNode) -> int:
    if isinstance(node, Leaf):
        return 1
    return 1 + count_nodes(node.left) + count_nodes(node.right)
