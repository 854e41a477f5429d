"""Gain-ratio decision tree with pessimistic pruning.

Numeric features get binary <= threshold splits (thresholds at midpoints
between consecutive distinct values); the hashed categorical feature gets
binary equality splits. Pruning is bottom-up subtree replacement using the
one-sided binomial upper confidence bound at CF=0.25, the classic
pessimistic-error recipe.

Tie-breaking is fixed everywhere: features are scanned in ascending index
order and only a strictly better gain ratio replaces the incumbent, so the
lower feature index wins; within a feature the lowest qualifying threshold
wins; leaf majorities tie toward class 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .base import Dataset, N_CLASSES, entropy, require_trainable

_GAIN_TOL = 1e-12

# Phi^-1(0.75): normal deviate for the CF=0.25 one-sided bound.
Z_CF25 = 0.6744897501960817


@dataclass
class Node:
    counts: np.ndarray                # class counts reaching this node
    feature: int = -1                 # -1 marks a leaf
    threshold: float = 0.0            # numeric: x <= threshold goes left
    equal: bool = False               # categorical: x == threshold goes left
    left: "Node | None" = None
    right: "Node | None" = None

    @property
    def is_leaf(self) -> bool:
        return self.feature < 0

    def to_dict(self) -> dict:
        d = {"counts": self.counts.tolist()}
        if not self.is_leaf:
            d.update(feature=self.feature, threshold=self.threshold, equal=self.equal,
                     left=self.left.to_dict(), right=self.right.to_dict())
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Node":
        node = cls(np.array(d["counts"], dtype=np.int64))
        if "feature" in d:
            node.feature = d["feature"]
            node.threshold = d["threshold"]
            node.equal = d["equal"]
            node.left = cls.from_dict(d["left"])
            node.right = cls.from_dict(d["right"])
        return node


def _binary_entropy(pos: np.ndarray, n: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        p = pos / n
        q = 1.0 - p
        h = np.zeros_like(p)
        mask = (p > 0) & (p < 1)
        h[mask] = -(p[mask] * np.log2(p[mask]) + q[mask] * np.log2(q[mask]))
    return h


def _evaluate_partition(nl, pos_l, n, pos, parent_h, min_leaf):
    """Gain ratio for binary partitions given left sizes/positives (vectorized)."""
    nr = n - nl
    pos_r = pos - pos_l
    valid = (nl >= min_leaf) & (nr >= min_leaf)
    h_l = _binary_entropy(pos_l.astype(float), nl.astype(float))
    h_r = _binary_entropy(pos_r.astype(float), nr.astype(float))
    gain = parent_h - (nl / n) * h_l - (nr / n) * h_r
    pl = nl / n
    split_info = -(pl * np.log2(np.maximum(pl, 1e-300))
                   + (1 - pl) * np.log2(np.maximum(1 - pl, 1e-300)))
    valid &= (gain > _GAIN_TOL) & (split_info > _GAIN_TOL)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(valid, gain / split_info, -np.inf)
    return ratio


def _best_numeric(x, y, parent_h, min_leaf):
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    n = len(xs)
    cut = np.nonzero(xs[:-1] != xs[1:])[0]
    if len(cut) == 0:
        return None
    cum_pos = np.cumsum(ys)
    nl = cut + 1
    ratio = _evaluate_partition(nl, cum_pos[cut], n, cum_pos[-1], parent_h, min_leaf)
    best = int(np.argmax(ratio))
    if not np.isfinite(ratio[best]):
        return None
    threshold = (xs[cut[best]] + xs[cut[best] + 1]) / 2.0
    return float(ratio[best]), float(threshold)


def _best_categorical(x, y, parent_h, min_leaf):
    values, inverse, counts = np.unique(x, return_inverse=True, return_counts=True)
    if len(values) < 2:
        return None
    pos = np.zeros(len(values), np.int64)
    np.add.at(pos, inverse, y)
    n = len(x)
    ratio = _evaluate_partition(counts, pos, n, int(y.sum()), parent_h, min_leaf)
    best = int(np.argmax(ratio))
    if not np.isfinite(ratio[best]):
        return None
    return float(ratio[best]), float(values[best])


def _grow(X, y, cat_mask, min_leaf, rng, subset_size):
    counts = np.bincount(y, minlength=N_CLASSES).astype(np.int64)
    node = Node(counts)
    n = len(y)
    if counts.max() == n or n < 2 * min_leaf:
        return node
    if subset_size is not None:
        pool = np.sort(rng.choice(X.shape[1], size=min(subset_size, X.shape[1]),
                                  replace=False))
    else:
        pool = np.arange(X.shape[1])
    parent_h = entropy(counts)
    best = None   # (ratio, feature, threshold, equal)
    for f in pool:
        col = X[:, f]
        found = (_best_categorical(col, y, parent_h, min_leaf) if cat_mask[f]
                 else _best_numeric(col, y, parent_h, min_leaf))
        if found is not None and (best is None or found[0] > best[0]):
            best = (found[0], int(f), found[1], bool(cat_mask[f]))
    if best is None:
        return node
    _, f, threshold, equal = best
    go_left = (X[:, f] == threshold) if equal else (X[:, f] <= threshold)
    node.feature, node.threshold, node.equal = f, threshold, equal
    node.left = _grow(X[go_left], y[go_left], cat_mask, min_leaf, rng, subset_size)
    node.right = _grow(X[~go_left], y[~go_left], cat_mask, min_leaf, rng, subset_size)
    return node


# ---------------------------------------------------------------------------
# Pessimistic pruning


def added_errors(n: float, e: float, cf: float = 0.25) -> float:
    """Extra errors charged by the one-sided binomial upper bound (CF=0.25)."""
    if n == 0:
        return 0.0
    if e == 0:
        return n * (1.0 - cf ** (1.0 / n))
    if e < 1:
        base = n * (1.0 - cf ** (1.0 / n))
        return base + e * (added_errors(n, 1.0, cf) - base)
    if e + 0.5 >= n:
        return max(n - e, 0.0)
    z = Z_CF25
    f = (e + 0.5) / n
    r = (f + z * z / (2 * n)
         + z * math.sqrt(f / n - f * f / n + z * z / (4 * n * n))) / (1 + z * z / n)
    return r * n - e


def _pessimistic(counts: np.ndarray) -> float:
    n = float(counts.sum())
    e = n - float(counts.max())
    return e + added_errors(n, e)


def _prune(node: Node) -> float:
    """Returns the pruned subtree's pessimistic error; mutates in place."""
    if node.is_leaf:
        return _pessimistic(node.counts)
    subtree_err = _prune(node.left) + _prune(node.right)
    leaf_err = _pessimistic(node.counts)
    # Small tolerance so near-ties collapse to the simpler tree.
    if leaf_err <= subtree_err + 0.1:
        node.feature, node.left, node.right = -1, None, None
        return leaf_err
    return subtree_err


# ---------------------------------------------------------------------------


@dataclass
class DecisionTree:
    """Trained tree; scores are shill fractions at the reached leaf."""

    root: Node
    categorical_mask: np.ndarray
    schema_hash: str = ""
    seed: int = 0
    algorithm: str = "DecisionTree"
    params: dict = field(default_factory=dict)

    def scores(self, X: np.ndarray) -> np.ndarray:
        out = np.empty(len(X), np.float64)
        self._fill(self.root, X, np.arange(len(X)), out)
        return out

    def _fill(self, node: Node, X, idx, out):
        if node.is_leaf:
            total = node.counts.sum()
            out[idx] = node.counts[1] / total if total else 0.0
            return
        col = X[idx, node.feature]
        go_left = (col == node.threshold) if node.equal else (col <= node.threshold)
        self._fill(node.left, X, idx[go_left], out)
        self._fill(node.right, X, idx[~go_left], out)

    def votes(self, X: np.ndarray) -> np.ndarray:
        """Hard class votes; score ties resolve to class 0 (benign)."""
        return (self.scores(X) > 0.5).astype(np.int8)

    def node_count(self) -> int:
        def walk(n):
            return 1 if n.is_leaf else 1 + walk(n.left) + walk(n.right)
        return walk(self.root)

    def depth(self) -> int:
        def walk(n):
            return 0 if n.is_leaf else 1 + max(walk(n.left), walk(n.right))
        return walk(self.root)


def train_decision_tree(dataset: Dataset, min_leaf: int = 2, prune: bool = True,
                        subset_size: int | None = None, seed: int = 0,
                        rng: np.random.Generator | None = None,
                        canonicalize: bool = True) -> DecisionTree:
    require_trainable(dataset)
    if canonicalize:
        dataset = dataset.canonical()
    if rng is None:
        rng = np.random.default_rng(seed)
    cat_mask = dataset.categorical_mask()
    root = _grow(dataset.X, dataset.y.astype(np.int64), cat_mask, min_leaf,
                 rng, subset_size)
    if prune:
        _prune(root)
    return DecisionTree(root, cat_mask, dataset.schema_hash, seed,
                        params={"min_leaf": min_leaf, "prune": prune,
                                "subset_size": subset_size})
