"""Sampling, cross-validation, ranking metrics, and the imbalanced protocol.

The headline experiment: train on a balanced sample (all training shills +
equally many random benign users), then measure precision at the top k of
the score ranking on test sets rebuilt at increasing benign:shill ratios.
Test sets are nested across ratios within a repetition (the benign pool is
drawn once and sliced by prefix), which keeps the ratio curves comparable.

Everything stochastic draws from numpy Generators seeded explicitly, with
draws defined over the sorted-by-user-id ordering, so shuffling input rows
never changes a result.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import rankdata

from .classifiers import Dataset, predict_score, train
from .classifiers.base import entropy
from .features import CATEGORICAL_FEATURES, FeatureMatrix

DEFAULT_RATIOS = (2, 5, 10, 20, 100)


# ---------------------------------------------------------------------------
# Sampling


def _cohort_ids(matrix: FeatureMatrix):
    shills = sorted(u for u, y in zip(matrix.user_ids, matrix.labels) if y == 1)
    benign = sorted(u for u, y in zip(matrix.user_ids, matrix.labels) if y == 0)
    return shills, benign


def balanced_training_sample(matrix: FeatureMatrix, seed: int = 0,
                             exclude=(), shill_subset=None) -> Dataset:
    """All shills (or the given subset) + equally many random benign users.

    Benign users are drawn uniformly without replacement from the benign
    pool minus `exclude`; shills listed in `exclude` are dropped too.
    """
    shills, benign = _cohort_ids(matrix)
    excluded = set(exclude)
    shills = [u for u in (sorted(shill_subset) if shill_subset is not None else shills)
              if u not in excluded]
    pool = [u for u in benign if u not in excluded]
    if not shills:
        raise ValueError("no shill users available for the training sample")
    if len(pool) < len(shills):
        raise ValueError(f"benign pool ({len(pool)}) smaller than shill count "
                         f"({len(shills)})")
    rng = np.random.default_rng(seed)
    chosen = rng.choice(len(pool), size=len(shills), replace=False)
    ids = sorted(shills + [pool[i] for i in chosen])
    return Dataset.from_matrix(matrix.select(ids))


def stratified_kfold(dataset: Dataset, k: int = 10, seed: int = 0) -> list[np.ndarray]:
    """Disjoint folds covering the dataset; per-fold class counts differ <= 1.

    Returns row-index arrays into `dataset`. The partition depends only on
    (user ids, labels, k, seed), not on row order.
    """
    counts = dataset.class_counts()
    if counts.min() < k:
        raise ValueError(f"every class needs >= {k} rows for {k}-fold CV "
                         f"(counts: {counts.tolist()})")
    order = sorted(range(dataset.n), key=lambda i: dataset.user_ids[i])
    rng = np.random.default_rng(seed)
    folds: list[list[int]] = [[] for _ in range(k)]
    for c in (0, 1):
        rows = np.array([i for i in order if dataset.y[i] == c], dtype=np.int64)
        rows = rows[rng.permutation(len(rows))]
        for fold_i, part in enumerate(np.array_split(rows, k)):
            folds[fold_i].extend(part.tolist())
    return [np.array(sorted(f), dtype=np.int64) for f in folds]


# ---------------------------------------------------------------------------
# Metrics


def confusion_metrics(scores, labels, threshold: float = 0.5) -> dict:
    """TP rate, FP rate, F-measure for the shill class at `threshold`.

    A score >= threshold predicts shill. Degenerate denominators yield 0.0.
    """
    scores = np.asarray(scores, np.float64)
    labels = np.asarray(labels)
    pred = scores >= threshold
    pos, neg = labels == 1, labels == 0
    tp = int((pred & pos).sum())
    fp = int((pred & neg).sum())
    fn = int((~pred & pos).sum())
    tn = int((~pred & neg).sum())
    tp_rate = tp / (tp + fn) if tp + fn else 0.0
    fp_rate = fp / (fp + tn) if fp + tn else 0.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    f_measure = (2 * precision * tp_rate / (precision + tp_rate)
                 if precision + tp_rate else 0.0)
    return {"tp_rate": tp_rate, "fp_rate": fp_rate, "f_measure": f_measure,
            "precision": precision, "tp": tp, "fp": fp, "tn": tn, "fn": fn}


def auc(scores, labels) -> float:
    """Rank-statistic AUC; tied scores contribute 1/2 per positive-negative pair."""
    scores = np.asarray(scores, np.float64)
    labels = np.asarray(labels)
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise ValueError("AUC needs at least one positive and one negative")
    ranks = rankdata(scores, method="average")
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2) / (n_pos * n_neg)


def rank_users(scores, labels, user_ids):
    """Indices sorted by score descending, score ties by ascending user id."""
    scores = np.asarray(scores, np.float64)
    uid_rank = np.empty(len(scores), np.int64)
    uid_rank[np.argsort(np.asarray(user_ids, dtype=object))] = np.arange(len(scores))
    return np.lexsort((uid_rank, -scores))


def precision_at_k(scores, labels, k: int, user_ids=None) -> float:
    """Fraction of true shills in the top k of the ranking.

    k larger than the row count saturates to the row count. Ties in score
    are broken toward the lower user id (stable, never optimistic); when
    user ids are not supplied, input order stands in for id order.
    """
    scores = np.asarray(scores, np.float64)
    labels = np.asarray(labels)
    if k < 1:
        raise ValueError("k must be >= 1")
    k = min(k, len(scores))
    if user_ids is None:
        order = np.lexsort((np.arange(len(scores)), -scores))
    else:
        order = rank_users(scores, labels, user_ids)
    return float(labels[order[:k]].sum() / k)


# ---------------------------------------------------------------------------
# Cross-validation


def cross_validate(algorithm: str, dataset: Dataset, k: int = 10, seed: int = 0,
                   hyperparameters: dict | None = None) -> dict:
    """k-fold CV; metrics computed over the pooled out-of-fold scores."""
    folds = stratified_kfold(dataset, k, seed)
    scores = np.empty(dataset.n, np.float64)
    all_idx = np.arange(dataset.n)
    for fold in folds:
        train_idx = np.setdiff1d(all_idx, fold)
        model = train(algorithm, dataset.take(train_idx), hyperparameters, seed)
        scores[fold] = model.scores(dataset.X[fold])
    metrics = confusion_metrics(scores, dataset.y)
    metrics["auc"] = auc(scores, dataset.y)
    metrics["algorithm"] = algorithm
    metrics["folds"] = k
    metrics["seed"] = seed
    return {"scores": scores, "metrics": metrics}


# ---------------------------------------------------------------------------
# Imbalanced precision@k protocol


@dataclass(frozen=True)
class ProtocolPlan:
    """Resolved sample sizes for one repetition of the protocol."""

    n_shills: int
    n_benign: int
    n_train_shills: int
    n_test_shills: int
    ratios: tuple[int, ...]
    test_benign_per_ratio: dict[int, int]

    @property
    def max_benign_needed(self) -> int:
        return self.n_train_shills + max(self.test_benign_per_ratio.values())


def protocol_plan(n_shills: int, n_benign: int,
                  ratios=DEFAULT_RATIOS, train_fraction: float = 0.9) -> ProtocolPlan:
    n_train = int(n_shills * train_fraction)
    n_test = n_shills - n_train
    if n_train < 1 or n_test < 1:
        raise ValueError(f"{n_shills} shills cannot be split "
                         f"{train_fraction:.0%}/{1 - train_fraction:.0%}")
    per_ratio = {r: r * n_test for r in ratios}
    plan = ProtocolPlan(n_shills, n_benign, n_train, n_test, tuple(ratios), per_ratio)
    for r in ratios:
        if n_benign < n_train + per_ratio[r]:
            raise ValueError(
                f"ratio 1:{r} needs {n_train + per_ratio[r]} benign users "
                f"({n_train} train + {per_ratio[r]} test); only {n_benign} exist")
    return plan


@dataclass
class EvaluationReport:
    """Averaged precision@k curves per ratio, plus run provenance."""

    algorithm: str
    seed: int
    repetitions: int
    rep_seeds: list[int]
    ratios: list[int]
    k_grid: list[int]
    curves: dict[str, list[float]]                  # "1:10" -> mean precision per k
    per_repetition: dict[str, list[list[float]]]    # "1:10" -> [rep][k index]
    test_sizes: dict[str, int]
    cv_metrics: dict | None = None

    def curve(self, ratio: int) -> list[float]:
        return self.curves[f"1:{ratio}"]

    def precision_at(self, ratio: int, k: int) -> float:
        return self.curves[f"1:{ratio}"][self.k_grid.index(k)]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm, "seed": self.seed,
            "repetitions": self.repetitions, "rep_seeds": self.rep_seeds,
            "ratios": self.ratios, "k_grid": self.k_grid,
            "curves": self.curves, "per_repetition": self.per_repetition,
            "test_sizes": self.test_sizes, "cv_metrics": self.cv_metrics,
        }


def imbalanced_protocol(matrix: FeatureMatrix, algorithm: str = "RotationForest",
                        ratios=DEFAULT_RATIOS, repetitions: int = 3, seed: int = 0,
                        k_grid=None, hyperparameters: dict | None = None,
                        train_fraction: float = 0.9) -> EvaluationReport:
    """The seven-step protocol, averaged over `repetitions`.

    Per repetition r (seed+r): hold out 10% of shills; train on the other
    90% plus equally many benign; draw one benign test pool disjoint from
    training; test set at ratio 1:R = held-out shills + first R*|held-out|
    of the pool; report precision at each k (k past the test size saturates
    to the test size).
    """
    if k_grid is None:
        k_grid = list(range(1, 1001))
    k_grid = sorted(set(int(k) for k in k_grid))
    ratios = tuple(sorted(ratios))
    shills, benign = _cohort_ids(matrix)
    plan = protocol_plan(len(shills), len(benign), ratios, train_fraction)

    per_rep: dict[str, list[list[float]]] = {f"1:{r}": [] for r in ratios}
    rep_seeds = [seed + r for r in range(repetitions)]
    for rep_seed in rep_seeds:
        rng = np.random.default_rng(rep_seed)
        shill_pick = rng.choice(len(shills), size=plan.n_train_shills, replace=False)
        train_shills = [shills[i] for i in sorted(shill_pick)]
        test_shills = sorted(set(shills) - set(train_shills))
        benign_pick = rng.choice(len(benign), size=plan.n_train_shills, replace=False)
        train_benign = [benign[i] for i in sorted(benign_pick)]
        train_ids = sorted(train_shills + train_benign)
        train_benign_set = set(train_benign)
        pool = [u for u in benign if u not in train_benign_set]
        pool_pick = rng.choice(len(pool), size=max(plan.test_benign_per_ratio.values()),
                               replace=False)
        test_pool = [pool[i] for i in pool_pick]    # draw order kept: prefixes nest

        model = train(algorithm, Dataset.from_matrix(matrix.select(train_ids)),
                      hyperparameters, seed=rep_seed)
        for r in ratios:
            test_ids = test_shills + test_pool[:plan.test_benign_per_ratio[r]]
            assert not set(test_ids) & set(train_ids)
            sub = matrix.select(sorted(test_ids))
            scores = predict_score(model, sub)
            curve = [precision_at_k(scores, sub.labels, k, sub.user_ids)
                     for k in k_grid]
            per_rep[f"1:{r}"].append(curve)

    curves = {label: np.mean(np.array(reps), axis=0).tolist()
              for label, reps in per_rep.items()}
    test_sizes = {f"1:{r}": plan.n_test_shills + plan.test_benign_per_ratio[r]
                  for r in ratios}
    return EvaluationReport(algorithm, seed, repetitions, rep_seeds, list(ratios),
                            list(k_grid), curves, per_rep, test_sizes)


# ---------------------------------------------------------------------------
# Information gain with MDL discretization


def _mdl_accepts(y_sorted: np.ndarray, lo: int, hi: int, cut: int,
                 gain: float, h_all: float, h_l: float, h_r: float) -> bool:
    n = hi - lo
    k = len(np.unique(y_sorted[lo:hi]))
    k1 = len(np.unique(y_sorted[lo:cut]))
    k2 = len(np.unique(y_sorted[cut:hi]))
    delta = math.log2(3 ** k - 2) - (k * h_all - k1 * h_l - k2 * h_r)
    return gain > (math.log2(n - 1) + delta) / n


def _entropy_slice(y: np.ndarray, lo: int, hi: int) -> float:
    return entropy(np.bincount(y[lo:hi], minlength=2))


def _best_cut(x: np.ndarray, y: np.ndarray, lo: int, hi: int):
    """Best entropy cut position in [lo, hi); only at value boundaries."""
    n = hi - lo
    xs = x[lo:hi]
    boundaries = np.nonzero(xs[:-1] != xs[1:])[0] + 1   # cut before this offset
    if len(boundaries) == 0:
        return None
    ys = y[lo:hi]
    cum_pos = np.cumsum(ys)
    pos_total = cum_pos[-1]
    nl = boundaries
    pos_l = cum_pos[boundaries - 1]
    nr = n - nl
    pos_r = pos_total - pos_l

    def h(p, m):
        with np.errstate(divide="ignore", invalid="ignore"):
            a = p / m
            b = 1 - a
            out = np.zeros_like(a, dtype=np.float64)
            mask = (a > 0) & (a < 1)
            out[mask] = -(a[mask] * np.log2(a[mask]) + b[mask] * np.log2(b[mask]))
        return out

    h_l = h(pos_l.astype(float), nl.astype(float))
    h_r = h(pos_r.astype(float), nr.astype(float))
    h_all = _entropy_slice(y, lo, hi)
    infos = (nl / n) * h_l + (nr / n) * h_r
    best = int(np.argmin(infos))
    gain = h_all - infos[best]
    return (lo + int(boundaries[best]), gain, h_all,
            float(h_l[best]), float(h_r[best]))


def mdl_discretize(values: np.ndarray, labels: np.ndarray) -> list[float]:
    """Fayyad-Irani recursive entropy cuts with the MDL stopping rule.

    Returns ascending cut thresholds (midpoints); empty if no cut survives.
    """
    order = np.argsort(values, kind="stable")
    x, y = values[order], labels[order].astype(np.int64)
    cut_positions: list[int] = []

    def recurse(lo: int, hi: int):
        if hi - lo < 2:
            return
        found = _best_cut(x, y, lo, hi)
        if found is None:
            return
        cut, gain, h_all, h_l, h_r = found
        if gain <= 0 or not _mdl_accepts(y, lo, hi, cut, gain, h_all, h_l, h_r):
            return
        cut_positions.append(cut)
        recurse(lo, cut)
        recurse(cut, hi)

    recurse(0, len(x))
    return sorted((x[c - 1] + x[c]) / 2.0 for c in cut_positions)


def equal_frequency_cuts(values: np.ndarray, bins: int = 10) -> list[float]:
    qs = np.quantile(values, np.linspace(0, 1, bins + 1)[1:-1])
    return sorted(set(float(q) for q in qs))


def information_gain(values: np.ndarray, labels: np.ndarray,
                     categorical: bool = False,
                     equal_frequency_fallback: bool = False) -> float:
    """IG in bits: H(label) - H(label | binned feature)."""
    labels = np.asarray(labels, np.int64)
    h_label = entropy(np.bincount(labels, minlength=2))
    if categorical:
        _, bin_idx = np.unique(values, return_inverse=True)
    else:
        cuts = mdl_discretize(np.asarray(values, np.float64), labels)
        if not cuts and equal_frequency_fallback:
            cuts = equal_frequency_cuts(np.asarray(values, np.float64))
        if not cuts:
            return 0.0
        bin_idx = np.searchsorted(np.array(cuts), values, side="left")
    n = len(labels)
    cond = 0.0
    for b in np.unique(bin_idx):
        mask = bin_idx == b
        cond += (mask.sum() / n) * entropy(np.bincount(labels[mask], minlength=2))
    return max(h_label - cond, 0.0)


def information_gain_ranking(dataset: Dataset,
                             equal_frequency_fallback: bool = False) -> list[tuple[str, float]]:
    """(feature, IG) sorted by IG descending; ties keep feature order."""
    cat_mask = dataset.categorical_mask()
    scored = []
    for f, name in enumerate(dataset.feature_names):
        ig = information_gain(dataset.X[:, f], dataset.y, bool(cat_mask[f]),
                              equal_frequency_fallback)
        scored.append((name, ig))
    order = sorted(range(len(scored)), key=lambda i: (-scored[i][1], i))
    return [scored[i] for i in order]


# ---------------------------------------------------------------------------
# Report writers


def write_report_json(report: EvaluationReport, stream) -> None:
    json.dump(report.to_dict(), stream, indent=2, sort_keys=True)
    stream.write("\n")


def write_precision_csv(report: EvaluationReport, stream) -> None:
    stream.write("ratio,k,mean_precision," +
                 ",".join(f"rep{r}" for r in range(report.repetitions)) + "\n")
    for label in (f"1:{r}" for r in report.ratios):
        reps = report.per_repetition[label]
        for j, k in enumerate(report.k_grid):
            per = ",".join(f"{reps[r][j]:.6f}" for r in range(report.repetitions))
            stream.write(f"{label},{k},{report.curves[label][j]:.6f},{per}\n")


_SVG_COLORS = ("#1b6ca8", "#d1495b", "#3a7d44", "#8e5fa8", "#c77d1e", "#4f5d75")


def write_precision_svg(report: EvaluationReport, stream,
                        width: int = 840, height: int = 520) -> None:
    """Deterministic line plot of precision@k per ratio (no plotting deps)."""
    left, right, top, bottom = 70, 190, 40, 60
    plot_w, plot_h = width - left - right, height - top - bottom
    k_max = max(report.k_grid)

    def sx(k: float) -> float:
        return left + plot_w * (k - 1) / max(k_max - 1, 1)

    def sy(p: float) -> float:
        return top + plot_h * (1.0 - p)

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="0 0 {width} {height}">',
           f'<rect width="{width}" height="{height}" fill="white"/>',
           f'<text x="{left + plot_w / 2:.1f}" y="24" text-anchor="middle" '
           f'font-family="sans-serif" font-size="15">precision@k by benign:shill '
           f'ratio — {report.algorithm}</text>']
    # Axes + grid
    for i in range(11):
        p = i / 10
        y = sy(p)
        out.append(f'<line x1="{left}" y1="{y:.1f}" x2="{left + plot_w}" y2="{y:.1f}" '
                   'stroke="#dddddd" stroke-width="1"/>')
        out.append(f'<text x="{left - 8}" y="{y + 4:.1f}" text-anchor="end" '
                   f'font-family="sans-serif" font-size="11">{p:.1f}</text>')
    n_xticks = 5
    for i in range(n_xticks + 1):
        k = 1 + (k_max - 1) * i / n_xticks
        x = sx(k)
        out.append(f'<line x1="{x:.1f}" y1="{top + plot_h}" x2="{x:.1f}" '
                   f'y2="{top + plot_h + 5}" stroke="#333333" stroke-width="1"/>')
        out.append(f'<text x="{x:.1f}" y="{top + plot_h + 20}" text-anchor="middle" '
                   f'font-family="sans-serif" font-size="11">{int(round(k))}</text>')
    out.append(f'<rect x="{left}" y="{top}" width="{plot_w}" height="{plot_h}" '
               'fill="none" stroke="#333333" stroke-width="1"/>')
    out.append(f'<text x="{left + plot_w / 2:.1f}" y="{height - 18}" text-anchor="middle" '
               'font-family="sans-serif" font-size="13">k</text>')
    # Curves + legend
    for i, r in enumerate(report.ratios):
        label = f"1:{r}"
        color = _SVG_COLORS[i % len(_SVG_COLORS)]
        pts = " ".join(f"{sx(k):.2f},{sy(p):.2f}"
                       for k, p in zip(report.k_grid, report.curves[label]))
        out.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                   'stroke-width="1.8"/>')
        ly = top + 16 + i * 20
        out.append(f'<line x1="{left + plot_w + 14}" y1="{ly - 4}" '
                   f'x2="{left + plot_w + 44}" y2="{ly - 4}" stroke="{color}" '
                   'stroke-width="3"/>')
        out.append(f'<text x="{left + plot_w + 50}" y="{ly}" font-family="sans-serif" '
                   f'font-size="12">{label} (n={report.test_sizes[label]})</text>')
    out.append("</svg>")
    stream.write("\n".join(out) + "\n")
