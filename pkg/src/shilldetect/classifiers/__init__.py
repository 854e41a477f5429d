"""Shill-likelihood learners: training dispatch, scoring, serialization.

Every algorithm trains deterministically from (dataset, hyperparameters,
seed) and produces a model whose ``scores(X)`` returns a shill likelihood
in [0, 1] per row. Models pin the feature-manifest hash they were trained
on; scoring a mismatched matrix is refused.
"""

from __future__ import annotations

import json

import numpy as np

from ..features import FeatureMatrix
from .base import Dataset, entropy, require_trainable
from .pca import pca_basis
from .simple import KNN3, NaiveBayes, OneR, train_knn3, train_naive_bayes, train_oner
from .tree import DecisionTree, Node, train_decision_tree
from .ensembles import (
    RotationForest,
    RotationMember,
    TreeEnsemble,
    train_bagging,
    train_random_forest,
    train_rotation_forest,
)

ALGORITHMS = ("OneR", "NaiveBayes", "DecisionTree", "KNN3", "Bagging",
              "RandomForest", "RotationForest")

MODEL_FORMAT = "shilldetect-model"
MODEL_FORMAT_VERSION = 1


def train(algorithm: str, dataset: Dataset, hyperparameters: dict | None = None,
          seed: int = 0):
    """Train one of the supported algorithms with its default configuration.

    hyperparameters may override the documented defaults (e.g. n_members).
    """
    hp = dict(hyperparameters or {})
    if algorithm == "OneR":
        return train_oner(dataset, min_bucket=hp.pop("min_bucket", 6), seed=seed)
    if algorithm == "NaiveBayes":
        return train_naive_bayes(dataset, seed=seed)
    if algorithm == "DecisionTree":
        return train_decision_tree(dataset, min_leaf=hp.pop("min_leaf", 2),
                                   prune=hp.pop("prune", True), seed=seed)
    if algorithm == "KNN3":
        return train_knn3(dataset, k=hp.pop("k", 3), seed=seed)
    if algorithm == "Bagging":
        return train_bagging(dataset, n_members=hp.pop("n_members", 100), seed=seed)
    if algorithm == "RandomForest":
        return train_random_forest(dataset, n_members=hp.pop("n_members", 100),
                                   seed=seed)
    if algorithm == "RotationForest":
        return train_rotation_forest(dataset, n_members=hp.pop("n_members", 10),
                                     subset_size=hp.pop("subset_size", 3), seed=seed)
    raise ValueError(f"unknown algorithm {algorithm!r}; choose from {ALGORITHMS}")


def predict_score(model, features):
    """Shill likelihood(s) in [0, 1].

    Accepts a FeatureMatrix or Dataset (manifest-checked), a 2-D array
    (row per user), or a single 1-D feature vector (returns a float).
    """
    if isinstance(features, FeatureMatrix):
        _check_manifest(model, features.schema_hash())
        return model.scores(features.values)
    if isinstance(features, Dataset):
        _check_manifest(model, features.schema_hash)
        return model.scores(features.X)
    arr = np.asarray(features, dtype=np.float64)
    if arr.ndim == 1:
        return float(model.scores(arr[None, :])[0])
    return model.scores(arr)


def _check_manifest(model, schema_hash: str) -> None:
    trained = getattr(model, "schema_hash", "")
    if trained and schema_hash and trained != schema_hash:
        raise ValueError("feature manifest mismatch: model was trained on "
                         f"{trained[:12]}..., input has {schema_hash[:12]}...")


# ---------------------------------------------------------------------------
# JSON serialization


def _arr(a) -> list:
    return np.asarray(a).tolist()


def model_to_dict(model) -> dict:
    head = {"format": MODEL_FORMAT, "format_version": MODEL_FORMAT_VERSION,
            "algorithm": model.algorithm, "seed": model.seed,
            "schema_hash": model.schema_hash, "params": dict(model.params)}
    if isinstance(model, OneR):
        head["rule"] = {
            "feature": model.feature, "is_categorical": model.is_categorical,
            "edges": None if model.edges is None else _arr(model.edges),
            "bucket_counts": None if model.bucket_counts is None else _arr(model.bucket_counts),
            "value_counts": None if model.value_counts is None else
                {repr(v): _arr(c) for v, c in model.value_counts.items()},
            "overall_counts": _arr(model.overall_counts),
        }
    elif isinstance(model, NaiveBayes):
        head["bayes"] = {
            "priors": _arr(model.priors), "means": _arr(model.means),
            "variances": _arr(model.variances), "numeric_mask": _arr(model.numeric_mask),
            "cat_tables": {str(f): {repr(v): _arr(c) for v, c in t.items()}
                           for f, t in model.cat_tables.items()},
            "cat_class_totals": {str(f): _arr(c) for f, c in model.cat_class_totals.items()},
        }
    elif isinstance(model, KNN3):
        head["knn"] = {
            "train_X": _arr(model.train_X), "train_y": _arr(model.train_y),
            "mean": _arr(model.mean), "scale": _arr(model.scale),
            "numeric_mask": _arr(model.numeric_mask), "k": model.k,
        }
    elif isinstance(model, DecisionTree):
        head["tree"] = {"root": model.root.to_dict(),
                        "categorical_mask": _arr(model.categorical_mask)}
    elif isinstance(model, TreeEnsemble):
        head["members"] = [model_to_dict(t) for t in model.members]
    elif isinstance(model, RotationForest):
        head["members"] = [{
            "groups": [_arr(g) for g in m.groups],
            "bases": [_arr(b) for b in m.bases],
            "tree": model_to_dict(m.tree),
        } for m in model.members]
    else:
        raise TypeError(f"cannot serialize {type(model).__name__}")
    return head


def model_from_dict(d: dict):
    if d.get("format") != MODEL_FORMAT:
        raise ValueError("not a model container")
    if d.get("format_version") != MODEL_FORMAT_VERSION:
        raise ValueError(f"unsupported model format version {d.get('format_version')}")
    algo, seed = d["algorithm"], d["seed"]
    schema_hash, params = d["schema_hash"], d["params"]
    if algo == "OneR":
        r = d["rule"]
        return OneR(r["feature"], r["is_categorical"],
                    None if r["edges"] is None else np.array(r["edges"]),
                    None if r["bucket_counts"] is None else np.array(r["bucket_counts"], np.int64),
                    None if r["value_counts"] is None else
                        {float(v): np.array(c, np.int64) for v, c in r["value_counts"].items()},
                    np.array(r["overall_counts"], np.int64), schema_hash, seed,
                    params=params)
    if algo == "NaiveBayes":
        b = d["bayes"]
        return NaiveBayes(np.array(b["priors"]), np.array(b["means"]),
                          np.array(b["variances"]), np.array(b["numeric_mask"], bool),
                          {int(f): {float(v): np.array(c, np.int64) for v, c in t.items()}
                           for f, t in b["cat_tables"].items()},
                          {int(f): np.array(c, np.int64)
                           for f, c in b["cat_class_totals"].items()},
                          schema_hash, seed, params=params)
    if algo == "KNN3":
        k = d["knn"]
        return KNN3(np.array(k["train_X"]), np.array(k["train_y"]),
                    np.array(k["mean"]), np.array(k["scale"]),
                    np.array(k["numeric_mask"], bool), k["k"], schema_hash, seed,
                    params=params)
    if algo == "DecisionTree":
        t = d["tree"]
        return DecisionTree(Node.from_dict(t["root"]),
                            np.array(t["categorical_mask"], bool), schema_hash,
                            seed, params=params)
    if algo in ("Bagging", "RandomForest"):
        members = [model_from_dict(m) for m in d["members"]]
        return TreeEnsemble(members, algo, schema_hash, seed, params=params)
    if algo == "RotationForest":
        members = [RotationMember([np.array(g, np.int64) for g in m["groups"]],
                                  [np.array(b) for b in m["bases"]],
                                  model_from_dict(m["tree"]))
                   for m in d["members"]]
        return RotationForest(members, algo, schema_hash, seed, params=params)
    raise ValueError(f"unknown algorithm {algo!r} in model container")


def save_model(model, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(model_to_dict(model), fh)


def load_model(path, expected_schema_hash: str | None = None):
    with open(path, encoding="utf-8") as fh:
        model = model_from_dict(json.load(fh))
    if expected_schema_hash is not None and model.schema_hash != expected_schema_hash:
        raise ValueError("refusing model with mismatched feature manifest hash")
    return model


__all__ = [
    "ALGORITHMS", "Dataset", "train", "predict_score", "pca_basis",
    "train_oner", "train_naive_bayes", "train_knn3", "train_decision_tree",
    "train_bagging", "train_random_forest", "train_rotation_forest",
    "OneR", "NaiveBayes", "KNN3", "DecisionTree", "TreeEnsemble",
    "RotationForest", "entropy", "require_trainable",
    "model_to_dict", "model_from_dict", "save_model", "load_model",
]
