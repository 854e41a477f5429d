"""Vote ensembles over the gain-ratio tree.

All resampling happens on the canonical (sorted-by-user-id) row order with
one numpy Generator per member seeded at seed + member_index, so training
is reproducible and row-shuffle invariant, and members can be built in
parallel without sharing RNG state.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .base import Dataset, N_CLASSES, require_trainable
from .pca import pca_basis
from .tree import DecisionTree, Node, train_decision_tree


def _majority_leaf(dataset: Dataset, seed: int, params: dict) -> DecisionTree:
    # Degenerate bootstrap (one class): a constant tree, not an error.
    counts = np.bincount(dataset.y, minlength=N_CLASSES).astype(np.int64)
    return DecisionTree(Node(counts), dataset.categorical_mask(),
                        dataset.schema_hash, seed, params=params)


def _bootstrap(dataset: Dataset, rng: np.random.Generator) -> Dataset:
    return dataset.take(rng.integers(0, dataset.n, dataset.n))


@dataclass
class TreeEnsemble:
    """Bagged trees; the score is the fraction of members voting shill."""

    members: list[DecisionTree]
    algorithm: str
    schema_hash: str = ""
    seed: int = 0
    params: dict = field(default_factory=dict)

    def scores(self, X: np.ndarray) -> np.ndarray:
        votes = np.zeros(len(X), np.float64)
        for tree in self.members:
            votes += tree.votes(X)
        return votes / len(self.members)


def train_bagging(dataset: Dataset, n_members: int = 100, seed: int = 0) -> TreeEnsemble:
    require_trainable(dataset)
    ds = dataset.canonical()
    tree_params = {"min_leaf": 2, "prune": True, "subset_size": None}
    members = []
    for i in range(n_members):
        rng = np.random.default_rng(seed + i)
        boot = _bootstrap(ds, rng)
        if boot.class_counts().min() == 0:
            members.append(_majority_leaf(boot, seed + i, tree_params))
        else:
            members.append(train_decision_tree(boot, min_leaf=2, prune=True,
                                               seed=seed + i, rng=rng,
                                               canonicalize=False))
    return TreeEnsemble(members, "Bagging", ds.schema_hash, seed,
                        params={"n_members": n_members})


def train_random_forest(dataset: Dataset, n_members: int = 100,
                        seed: int = 0) -> TreeEnsemble:
    require_trainable(dataset)
    ds = dataset.canonical()
    subset = int(math.log2(ds.n_features)) + 1
    tree_params = {"min_leaf": 1, "prune": False, "subset_size": subset}
    members = []
    for i in range(n_members):
        rng = np.random.default_rng(seed + i)
        boot = _bootstrap(ds, rng)
        if boot.class_counts().min() == 0:
            members.append(_majority_leaf(boot, seed + i, tree_params))
        else:
            members.append(train_decision_tree(boot, min_leaf=1, prune=False,
                                               subset_size=subset, seed=seed + i,
                                               rng=rng, canonicalize=False))
    return TreeEnsemble(members, "RandomForest", ds.schema_hash, seed,
                        params={"n_members": n_members, "subset_size": subset})


# ---------------------------------------------------------------------------
# Rotation forest


@dataclass
class RotationMember:
    groups: list[np.ndarray]          # numeric column indices, disjoint
    bases: list[np.ndarray]           # per-group orthonormal basis
    tree: DecisionTree

    def rotate(self, X: np.ndarray) -> np.ndarray:
        out = np.array(X, np.float64, copy=True)
        for g, B in zip(self.groups, self.bases):
            out[:, g] = X[:, g] @ B
        return out


@dataclass
class RotationForest:
    """Per-member PCA rotations of random numeric-feature subsets.

    Each member permutes the numeric columns, partitions them into groups
    of `subset_size`, fits a PCA basis per group on a 50% class-stratified
    bootstrap, trains a pruned tree on the rotated data, and votes. The
    categorical State column is never rotated; it passes through raw.
    """

    members: list[RotationMember]
    algorithm: str = "RotationForest"
    schema_hash: str = ""
    seed: int = 0
    params: dict = field(default_factory=dict)

    def scores(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, np.float64)
        votes = np.zeros(len(X), np.float64)
        for m in self.members:
            votes += m.tree.votes(m.rotate(X))
        return votes / len(self.members)


def _stratified_half_bootstrap(y: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """50% of each class, drawn with replacement, in class order."""
    parts = []
    for c in range(N_CLASSES):
        rows = np.nonzero(y == c)[0]
        if len(rows) == 0:
            continue
        parts.append(rng.choice(rows, size=max(1, len(rows) // 2), replace=True))
    return np.sort(np.concatenate(parts))


def train_rotation_forest(dataset: Dataset, n_members: int = 10,
                          subset_size: int = 3, seed: int = 0) -> RotationForest:
    require_trainable(dataset)
    ds = dataset.canonical()
    numeric = np.nonzero(~ds.categorical_mask())[0]
    members = []
    for i in range(n_members):
        rng = np.random.default_rng(seed + i)
        perm = rng.permutation(numeric)
        groups = [perm[j:j + subset_size] for j in range(0, len(perm), subset_size)]
        bases = []
        for g in groups:
            rows = _stratified_half_bootstrap(ds.y, rng)
            sample = ds.X[rows][:, g]
            if len(sample) < 2:
                sample = ds.X[:, g]
            with warnings.catch_warnings():
                # Constant columns legitimately degrade to identity here.
                warnings.simplefilter("ignore")
                bases.append(pca_basis(sample))
        member = RotationMember([np.asarray(g) for g in groups], bases, None)
        rotated = Dataset(member.rotate(ds.X), ds.y, ds.user_ids,
                          ds.feature_names, ds.categorical, ds.schema_hash)
        member.tree = train_decision_tree(rotated, min_leaf=2, prune=True,
                                          seed=seed + i, rng=rng,
                                          canonicalize=False)
        members.append(member)
    return RotationForest(members, "RotationForest", ds.schema_hash, seed,
                          params={"n_members": n_members, "subset_size": subset_size})
