"""Single-rule, Bayes, and nearest-neighbor baselines."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .base import Dataset, N_CLASSES, require_trainable

_VAR_FLOOR = 1e-9


# ---------------------------------------------------------------------------
# OneR: the best single-feature rule.


@dataclass
class OneR:
    """One feature, bucketed; prediction is the bucket's majority class.

    Numeric features are discretized by scanning values in ascending order
    and closing a bucket once its majority class has at least `min_bucket`
    members; buckets only close at value changes, a trailing partial bucket
    merges into its predecessor, and adjacent buckets predicting the same
    class are merged. The score is the bucket's empirical shill frequency.
    """

    feature: int
    is_categorical: bool
    # numeric rule: ascending upper edges (last = +inf) with bucket counts
    edges: np.ndarray | None
    bucket_counts: np.ndarray | None      # (n_buckets, 2)
    # categorical rule: value -> counts; fallback = overall counts
    value_counts: dict | None
    overall_counts: np.ndarray
    schema_hash: str = ""
    seed: int = 0
    algorithm: str = "OneR"
    params: dict = field(default_factory=dict)

    def scores(self, X: np.ndarray) -> np.ndarray:
        col = X[:, self.feature]
        if self.is_categorical:
            fallback = self.overall_counts
            out = np.empty(len(col))
            for i, v in enumerate(col):
                counts = self.value_counts.get(float(v), fallback)
                out[i] = counts[1] / counts.sum()
            return out
        idx = np.searchsorted(self.edges, col, side="left")
        counts = self.bucket_counts[idx]
        return counts[:, 1] / counts.sum(axis=1)

    def training_errors(self) -> int:
        if self.is_categorical:
            return int(sum(c.sum() - c.max() for c in self.value_counts.values()))
        return int((self.bucket_counts.sum(axis=1) - self.bucket_counts.max(axis=1)).sum())


def _numeric_rule(x: np.ndarray, y: np.ndarray, min_bucket: int):
    """Bucket edges + per-bucket class counts for one numeric feature."""
    order = np.argsort(x, kind="stable")
    xs, ys = x[order], y[order]
    values, starts = np.unique(xs, return_index=True)
    bounds = np.append(starts, len(xs))
    edges: list[float] = []
    buckets: list[np.ndarray] = []
    current = np.zeros(N_CLASSES, np.int64)
    for g in range(len(values)):
        current += np.bincount(ys[bounds[g]:bounds[g + 1]], minlength=N_CLASSES)
        if current.max() >= min_bucket and g + 1 < len(values):
            edges.append((values[g] + values[g + 1]) / 2.0)
            buckets.append(current)
            current = np.zeros(N_CLASSES, np.int64)
    # The scan never closes on the final value group, so `current` is nonempty:
    # keep it if it qualifies on its own, otherwise fold it into its neighbor.
    if current.max() >= min_bucket or not buckets:
        buckets.append(current)
    else:
        buckets[-1] = buckets[-1] + current
        edges.pop()
    # Merge adjacent buckets that predict the same class (ties -> class 0).
    merged_edges: list[float] = []
    merged: list[np.ndarray] = [buckets[0]]
    for i in range(1, len(buckets)):
        if int(np.argmax(merged[-1])) == int(np.argmax(buckets[i])):
            merged[-1] = merged[-1] + buckets[i]
        else:
            merged_edges.append(edges[i - 1])
            merged.append(buckets[i])
    edge_arr = np.array(merged_edges + [np.inf])
    return edge_arr, np.vstack(merged)


def train_oner(dataset: Dataset, min_bucket: int = 6, seed: int = 0) -> OneR:
    require_trainable(dataset)
    dataset = dataset.canonical()
    cat_mask = dataset.categorical_mask()
    y = dataset.y.astype(np.int64)
    overall = np.bincount(y, minlength=N_CLASSES)
    best = None   # (errors, feature, payload)
    for f in range(dataset.n_features):
        col = dataset.X[:, f]
        if cat_mask[f]:
            values = np.unique(col)
            vc = {}
            for v in values:
                vc[float(v)] = np.bincount(y[col == v], minlength=N_CLASSES)
            errors = int(sum(c.sum() - c.max() for c in vc.values()))
            payload = ("cat", vc)
        else:
            edges, buckets = _numeric_rule(col, y, min_bucket)
            errors = int((buckets.sum(axis=1) - buckets.max(axis=1)).sum())
            payload = ("num", (edges, buckets))
        if best is None or errors < best[0]:
            best = (errors, f, payload)
    _, feature, payload = best
    if payload[0] == "cat":
        return OneR(feature, True, None, None, payload[1], overall,
                    dataset.schema_hash, seed, params={"min_bucket": min_bucket})
    edges, buckets = payload[1]
    return OneR(feature, False, edges, buckets, None, overall,
                dataset.schema_hash, seed, params={"min_bucket": min_bucket})


# ---------------------------------------------------------------------------
# Gaussian / frequency-table Naive Bayes.


@dataclass
class NaiveBayes:
    """Gaussian likelihoods for numeric columns, Laplace tables for State.

    Numeric variance is floored at 1e-9 so constant columns stay finite.
    Categorical tables reserve one extra Laplace slot for unseen values.
    """

    priors: np.ndarray                 # (2,)
    means: np.ndarray                  # (2, F) numeric columns only meaningful
    variances: np.ndarray              # (2, F)
    numeric_mask: np.ndarray
    cat_tables: dict                   # feature -> {value: (2,) counts}
    cat_class_totals: dict             # feature -> (2,) row counts
    schema_hash: str = ""
    seed: int = 0
    algorithm: str = "NaiveBayes"
    params: dict = field(default_factory=dict)

    def scores(self, X: np.ndarray) -> np.ndarray:
        n = len(X)
        log_post = np.tile(np.log(self.priors), (n, 1))    # (n, 2)
        Xn = X[:, self.numeric_mask]
        for c in range(N_CLASSES):
            mu = self.means[c, self.numeric_mask]
            var = self.variances[c, self.numeric_mask]
            log_post[:, c] += (-0.5 * (np.log(2 * np.pi * var)
                                       + (Xn - mu) ** 2 / var)).sum(axis=1)
        for f, table in self.cat_tables.items():
            totals = self.cat_class_totals[f]
            n_values = len(table)
            col = X[:, f]
            for c in range(N_CLASSES):
                denom = totals[c] + n_values + 1
                probs = np.array([
                    (table[float(v)][c] + 1) / denom if float(v) in table else 1.0 / denom
                    for v in col])
                log_post[:, c] += np.log(probs)
        log_post -= log_post.max(axis=1, keepdims=True)
        post = np.exp(log_post)
        return post[:, 1] / post.sum(axis=1)


def train_naive_bayes(dataset: Dataset, seed: int = 0) -> NaiveBayes:
    require_trainable(dataset)
    dataset = dataset.canonical()
    cat_mask = dataset.categorical_mask()
    numeric_mask = ~cat_mask
    F = dataset.n_features
    priors = dataset.class_counts() / dataset.n
    means = np.zeros((N_CLASSES, F))
    variances = np.ones((N_CLASSES, F))
    for c in range(N_CLASSES):
        rows = dataset.X[dataset.y == c]
        means[c] = rows.mean(axis=0)
        variances[c] = np.maximum(rows.var(axis=0), _VAR_FLOOR)
    cat_tables, cat_totals = {}, {}
    for f in np.nonzero(cat_mask)[0]:
        col = dataset.X[:, f]
        table = {}
        for v in np.unique(col):
            counts = np.bincount(dataset.y[col == v].astype(np.int64),
                                 minlength=N_CLASSES)
            table[float(v)] = counts
        cat_tables[int(f)] = table
        cat_totals[int(f)] = dataset.class_counts()
    return NaiveBayes(priors, means, variances, numeric_mask, cat_tables,
                      cat_totals, dataset.schema_hash, seed)


# ---------------------------------------------------------------------------
# 3-nearest-neighbor voting.


@dataclass
class KNN3:
    """Distance: Euclidean over z-scored numerics + 0/1 categorical mismatch.

    Standardization statistics are frozen from the training set. Equal
    distances break toward the lower user id, so scores are reproducible;
    they take values in {0, 1/3, 2/3, 1}.
    """

    train_X: np.ndarray               # standardized numerics + raw categoricals
    train_y: np.ndarray
    mean: np.ndarray
    scale: np.ndarray
    numeric_mask: np.ndarray
    k: int = 3
    schema_hash: str = ""
    seed: int = 0
    algorithm: str = "KNN3"
    params: dict = field(default_factory=dict)

    def _standardize(self, X: np.ndarray) -> np.ndarray:
        Z = X.copy()
        Z[:, self.numeric_mask] = ((X[:, self.numeric_mask] - self.mean)
                                   / self.scale)
        return Z

    def scores(self, X: np.ndarray, chunk: int = 2048) -> np.ndarray:
        Z = self._standardize(np.asarray(X, np.float64))
        num, cat = self.numeric_mask, ~self.numeric_mask
        train_num = self.train_X[:, num]
        train_cat = self.train_X[:, cat]
        out = np.empty(len(Z))
        for lo in range(0, len(Z), chunk):
            zi = Z[lo:lo + chunk]
            d2 = ((zi[:, None, num] - train_num[None, :, :]) ** 2).sum(axis=2)
            if cat.any():
                d2 += (zi[:, None, cat] != train_cat[None, :, :]).sum(axis=2)
            # Training rows are in user-id order, so stable argsort breaks
            # distance ties toward the lower user id.
            nearest = np.argsort(d2, axis=1, kind="stable")[:, :self.k]
            out[lo:lo + chunk] = self.train_y[nearest].mean(axis=1)
        return out


def train_knn3(dataset: Dataset, k: int = 3, seed: int = 0) -> KNN3:
    require_trainable(dataset)
    if dataset.n < k:
        raise ValueError(f"k-NN needs at least {k} training rows, got {dataset.n}")
    dataset = dataset.canonical()
    numeric_mask = ~dataset.categorical_mask()
    mean = dataset.X[:, numeric_mask].mean(axis=0)
    scale = dataset.X[:, numeric_mask].std(axis=0)
    scale[scale == 0] = 1.0
    Z = dataset.X.copy()
    Z[:, numeric_mask] = (dataset.X[:, numeric_mask] - mean) / scale
    return KNN3(Z, dataset.y.astype(np.float64), mean, scale, numeric_mask, k,
                dataset.schema_hash, seed, params={"k": k})
