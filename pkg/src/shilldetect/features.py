"""Per-user behavioral features from the interaction graphs.

Each user gets a 31-value vector: 15 transaction features, 13 feedback
features, and 3 account-detail features, plus a binary shill/benign label.
All aggregation is vectorized over the compressed edge arrays; the per-user
block functions exist for spot checks and small cohorts.

Degenerate-value policy: max/min over an empty link set is 0 (not +-inf),
and any average with a zero denominator is 0. Classifiers downstream need
finite values everywhere.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import dataclass
from datetime import date, datetime, timezone

import numpy as np

from .records import LabelSet, UserProfile, crc32_state
from .graphs import FeedbackMultigraph, TransactionMultigraph

TRANSACTION_FEATURES = (
    "Buy-Trans-Num", "Sell-Trans-Num", "Unique-Sellers", "Unique-Buyers",
    "Bidir-Trans-Users", "Max-Buy-Price", "Min-Buy-Price", "Max-Buy-Quantity",
    "Total-Buy-Quantity", "Total-Buy-Amount", "Max-Sell-Price", "Min-Sell-Price",
    "Max-Sell-Quantity", "Total-Sell-Quantity", "Total-Sell-Amount",
)
FEEDBACK_FEATURES = (
    "Gvn-Fdbk-Num", "Rcv-Fdbk-Num", "Gvn-Unique-Fdbk", "Rcv-Unique-Fdbk",
    "Bidir-Fdbk-Users", "Gvn-Pos-Fdbk", "Gvn-Neg-Fdbk", "Rcv-Pos-Fdbk",
    "Rcv-Neg-Fdbk", "Gvn-Fdbk-RSum", "Rcv-Fdbk-RSum", "Gvn-Fdbk-Avg",
    "Rcv-Fdbk-Avg",
)
DETAIL_FEATURES = ("Birth-Year", "State-Hash", "Active-Days")

FEATURE_NAMES: tuple[str, ...] = TRANSACTION_FEATURES + FEEDBACK_FEATURES + DETAIL_FEATURES
FEATURE_VERSION = 1

# The CRC state hash is the only nominal (categorical) feature; its numeric
# magnitude is meaningless. Everything else is ordinal/numeric.
CATEGORICAL_FEATURES = ("State-Hash",)

_EPOCH = date(1970, 1, 1)
_SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class FeatureMatrix:
    """Row-per-user feature table with a frozen column manifest."""

    user_ids: list[str]
    values: np.ndarray            # shape (n_users, 31), float64
    labels: np.ndarray            # int8; 1 = shill, 0 = benign
    feature_names: tuple[str, ...] = FEATURE_NAMES
    version: int = FEATURE_VERSION

    def __post_init__(self):
        if self.values.shape != (len(self.user_ids), len(self.feature_names)):
            raise ValueError(f"values shape {self.values.shape} does not match "
                             f"{len(self.user_ids)} users x {len(self.feature_names)} features")
        if len(self.labels) != len(self.user_ids):
            raise ValueError("labels length does not match user count")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.feature_names.index(name)]

    def schema(self) -> dict:
        return {
            "version": self.version,
            "features": {name: i for i, name in enumerate(self.feature_names)},
            "categorical": list(CATEGORICAL_FEATURES),
            "label_values": {"benign": 0, "shill": 1},
        }

    def schema_hash(self) -> str:
        blob = json.dumps(self.schema(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()

    def select(self, user_ids) -> "FeatureMatrix":
        pos = {u: i for i, u in enumerate(self.user_ids)}
        idx = np.array([pos[u] for u in user_ids], dtype=np.int64)
        return FeatureMatrix(list(user_ids), self.values[idx], self.labels[idx],
                             self.feature_names, self.version)


# ---------------------------------------------------------------------------
# Vectorized whole-graph blocks (one value per vertex of the graph)


def _pair_stats(src: np.ndarray, dst: np.ndarray, n: int):
    """Distinct out/in-neighbor counts and mutual-partner counts per vertex."""
    if len(src) == 0:
        z = np.zeros(n, np.int64)
        return z, z.copy(), z.copy()
    keys = np.unique(src * n + dst)
    u_src, u_dst = keys // n, keys % n
    out_unique = np.bincount(u_src, minlength=n)
    in_unique = np.bincount(u_dst, minlength=n)
    mutual = np.isin(keys, u_dst * n + u_src)
    bidir = np.bincount(u_src[mutual], minlength=n)
    return out_unique, in_unique, bidir


def _grouped_max(keys: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, np.int64)
    np.maximum.at(out, keys, vals)
    return out


def _grouped_min(keys: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    out = np.full(n, np.iinfo(np.int64).max, np.int64)
    np.minimum.at(out, keys, vals)
    out[np.bincount(keys, minlength=n) == 0] = 0
    return out


def _grouped_sum(keys: np.ndarray, vals: np.ndarray, n: int) -> np.ndarray:
    out = np.zeros(n, np.int64)
    np.add.at(out, keys, vals)
    return out


def _transaction_block_all(tg: TransactionMultigraph) -> np.ndarray:
    """(n_vertices, 15) array in TRANSACTION_FEATURES order."""
    n = tg.n_vertices
    amount = tg.amount_cents()
    buy_num = np.bincount(tg.buyer, minlength=n)
    sell_num = np.bincount(tg.seller, minlength=n)
    unique_sellers, unique_buyers, bidir = _pair_stats(tg.buyer, tg.seller, n)
    cols = np.empty((n, 15), np.float64)
    cols[:, 0] = buy_num
    cols[:, 1] = sell_num
    cols[:, 2] = unique_sellers
    cols[:, 3] = unique_buyers
    cols[:, 4] = bidir
    cols[:, 5] = _grouped_max(tg.buyer, amount, n) / 100.0
    cols[:, 6] = _grouped_min(tg.buyer, amount, n) / 100.0
    cols[:, 7] = _grouped_max(tg.buyer, tg.quantity, n)
    cols[:, 8] = _grouped_sum(tg.buyer, tg.quantity, n)
    cols[:, 9] = _grouped_sum(tg.buyer, amount, n) / 100.0
    cols[:, 10] = _grouped_max(tg.seller, amount, n) / 100.0
    cols[:, 11] = _grouped_min(tg.seller, amount, n) / 100.0
    cols[:, 12] = _grouped_max(tg.seller, tg.quantity, n)
    cols[:, 13] = _grouped_sum(tg.seller, tg.quantity, n)
    cols[:, 14] = _grouped_sum(tg.seller, amount, n) / 100.0
    return cols


def _feedback_block_all(fg: FeedbackMultigraph) -> np.ndarray:
    """(n_vertices, 13) array in FEEDBACK_FEATURES order."""
    n = fg.n_vertices
    gvn_num = np.bincount(fg.giver, minlength=n)
    rcv_num = np.bincount(fg.receiver, minlength=n)
    gvn_unique, rcv_unique, bidir = _pair_stats(fg.giver, fg.receiver, n)
    pos, neg = fg.rating > 0, fg.rating < 0
    gvn_pos = np.bincount(fg.giver[pos], minlength=n)
    gvn_neg = np.bincount(fg.giver[neg], minlength=n)
    rcv_pos = np.bincount(fg.receiver[pos], minlength=n)
    rcv_neg = np.bincount(fg.receiver[neg], minlength=n)
    gvn_rsum = _grouped_sum(fg.giver, fg.rating, n)
    rcv_rsum = _grouped_sum(fg.receiver, fg.rating, n)
    cols = np.empty((n, 13), np.float64)
    cols[:, 0] = gvn_num
    cols[:, 1] = rcv_num
    cols[:, 2] = gvn_unique
    cols[:, 3] = rcv_unique
    cols[:, 4] = bidir
    cols[:, 5] = gvn_pos
    cols[:, 6] = gvn_neg
    cols[:, 7] = rcv_pos
    cols[:, 8] = rcv_neg
    cols[:, 9] = gvn_rsum
    cols[:, 10] = rcv_rsum
    with np.errstate(invalid="ignore", divide="ignore"):
        cols[:, 11] = np.where(gvn_num > 0, gvn_rsum / np.maximum(gvn_num, 1), 0.0)
        cols[:, 12] = np.where(rcv_num > 0, rcv_rsum / np.maximum(rcv_num, 1), 0.0)
    return cols


def _last_transaction_days(tg: TransactionMultigraph) -> np.ndarray:
    """Per-vertex UTC day number of the latest transaction, -1 if none."""
    last = np.full(tg.n_vertices, -1, np.int64)
    if tg.n_links:
        np.maximum.at(last, tg.buyer, tg.ts)
        np.maximum.at(last, tg.seller, tg.ts)
    days = last // _SECONDS_PER_DAY
    days[last < 0] = -1
    return days


def _detail_block_all(tg: TransactionMultigraph, profiles_by_id: dict) -> np.ndarray:
    """(n_vertices, 3): Birth-Year, State-Hash, Active-Days.

    Users without a profile get the sentinel row (0, crc32(""), 0).
    """
    n = tg.n_vertices
    cols = np.zeros((n, 3), np.float64)
    cols[:, 1] = crc32_state("")
    last_days = _last_transaction_days(tg)
    clamped = 0
    for v, user_id in enumerate(tg.users.ids):
        profile = profiles_by_id.get(user_id)
        if profile is None:
            continue
        cols[v, 0] = profile.birth_year or 0
        cols[v, 1] = crc32_state(profile.state_text)
        if last_days[v] >= 0:
            reg_day = (profile.registration_date - _EPOCH).days
            active = int(last_days[v]) - reg_day
            if active < 0:
                clamped += 1
                active = 0
            cols[v, 2] = active
    if clamped:
        warnings.warn(f"{clamped} users had transactions before their registration "
                      "date; Active-Days clamped to 0", stacklevel=3)
    return cols


# ---------------------------------------------------------------------------
# Per-user blocks (spot-check path; same formulas, direct adjacency slices)


def transaction_features(user_id: str, tg: TransactionMultigraph) -> np.ndarray:
    v = tg.users.position(user_id)
    out, inn = tg.out_links(v), tg.in_links(v)
    amount = tg.amount_cents()
    a_out, a_in = amount[out], amount[inn]
    q_out, q_in = tg.quantity[out], tg.quantity[inn]
    sellers = np.unique(tg.seller[out])
    buyers = np.unique(tg.buyer[inn])
    return np.array([
        len(out), len(inn), len(sellers), len(buyers),
        len(np.intersect1d(sellers, buyers)),
        a_out.max() / 100.0 if len(out) else 0.0,
        a_out.min() / 100.0 if len(out) else 0.0,
        q_out.max() if len(out) else 0,
        q_out.sum(),
        a_out.sum() / 100.0,
        a_in.max() / 100.0 if len(inn) else 0.0,
        a_in.min() / 100.0 if len(inn) else 0.0,
        q_in.max() if len(inn) else 0,
        q_in.sum(),
        a_in.sum() / 100.0,
    ], dtype=np.float64)


def feedback_features(user_id: str, fg: FeedbackMultigraph) -> np.ndarray:
    v = fg.users.position(user_id)
    out, inn = fg.out_links(v), fg.in_links(v)
    r_out, r_in = fg.rating[out], fg.rating[inn]
    given_to = np.unique(fg.receiver[out])
    got_from = np.unique(fg.giver[inn])
    gvn_num, rcv_num = len(out), len(inn)
    gvn_rsum, rcv_rsum = int(r_out.sum()), int(r_in.sum())
    return np.array([
        gvn_num, rcv_num, len(given_to), len(got_from),
        len(np.intersect1d(given_to, got_from)),
        int((r_out > 0).sum()), int((r_out < 0).sum()),
        int((r_in > 0).sum()), int((r_in < 0).sum()),
        gvn_rsum, rcv_rsum,
        gvn_rsum / gvn_num if gvn_num else 0.0,
        rcv_rsum / rcv_num if rcv_num else 0.0,
    ], dtype=np.float64)


def profile_features(user_id: str, profile: UserProfile | None,
                     last_transaction: date | None) -> np.ndarray:
    """Birth-Year, State-Hash, Active-Days for one user.

    last_transaction is the date of the user's most recent buy or sell,
    or None if they never transacted.
    """
    if profile is None:
        return np.array([0.0, float(crc32_state("")), 0.0])
    active = 0
    if last_transaction is not None:
        active = (last_transaction - profile.registration_date).days
        if active < 0:
            warnings.warn(f"user {user_id}: last transaction precedes registration; "
                          "Active-Days clamped to 0", stacklevel=2)
            active = 0
    return np.array([float(profile.birth_year or 0),
                     float(crc32_state(profile.state_text)),
                     float(active)])


# ---------------------------------------------------------------------------


def extract_all(users, tg: TransactionMultigraph, fg: FeedbackMultigraph,
                profiles=(), labels: LabelSet | None = None) -> FeatureMatrix:
    """Feature matrix for `users`, in the given order.

    Both graphs must share one vertex index (build them with build_graphs).
    Unknown ids raise KeyError listing the offenders.
    """
    if tg.users is not fg.users and tg.users.ids != fg.users.ids:
        raise ValueError("transaction and feedback graphs must share a vertex set")
    users = list(users)
    unknown = [u for u in users if u not in tg.users]
    if unknown:
        raise KeyError(f"{len(unknown)} ids not in the graphs, e.g. {unknown[:5]}")
    profiles_by_id = {p.user_id: p for p in profiles}
    full = np.hstack([
        _transaction_block_all(tg),
        _feedback_block_all(fg),
        _detail_block_all(tg, profiles_by_id),
    ])
    idx = tg.users.positions(users)
    label_set = labels.shill_ids if labels is not None else frozenset()
    y = np.fromiter((1 if u in label_set else 0 for u in users),
                    dtype=np.int8, count=len(users))
    return FeatureMatrix(users, full[idx], y)


def cohort_feature_ratios(matrix: FeatureMatrix,
                          labels: LabelSet | None = None) -> dict[str, dict[str, float]]:
    """shill-cohort / benign-cohort mean and median, per numeric feature.

    A zero benign statistic against a nonzero shill statistic reports as
    +-inf; 0/0 reports 1.0. The categorical State-Hash column is skipped.
    """
    if labels is not None:
        y = np.fromiter((1 if u in labels else 0 for u in matrix.user_ids),
                        dtype=np.int8, count=matrix.n_users)
    else:
        y = matrix.labels
    shill_rows = matrix.values[y == 1]
    benign_rows = matrix.values[y == 0]
    if len(shill_rows) == 0 or len(benign_rows) == 0:
        raise ValueError("both cohorts must be non-empty")

    def ratio(s: float, b: float) -> float:
        if b == 0.0:
            if s == 0.0:
                return 1.0
            return float("inf") if s > 0 else float("-inf")
        return s / b

    out: dict[str, dict[str, float]] = {}
    for j, name in enumerate(matrix.feature_names):
        if name in CATEGORICAL_FEATURES:
            continue
        out[name] = {
            "mean_ratio": ratio(float(shill_rows[:, j].mean()), float(benign_rows[:, j].mean())),
            "median_ratio": ratio(float(np.median(shill_rows[:, j])),
                                  float(np.median(benign_rows[:, j]))),
        }
    return out


# ---------------------------------------------------------------------------
# Export


def write_feature_csv(matrix: FeatureMatrix, stream) -> None:
    """CSV with user_id, the 31 features, and the label column."""
    stream.write("user_id," + ",".join(matrix.feature_names) + ",label\n")
    for i, user_id in enumerate(matrix.user_ids):
        row = ",".join(_fmt(x) for x in matrix.values[i])
        stream.write(f"{user_id},{row},{'shill' if matrix.labels[i] else 'benign'}\n")


def write_feature_schema(matrix: FeatureMatrix, stream) -> None:
    json.dump(matrix.schema() | {"schema_hash": matrix.schema_hash()},
              stream, indent=2, sort_keys=True)
    stream.write("\n")


def read_feature_csv(stream) -> FeatureMatrix:
    """Inverse of write_feature_csv (header must match the current manifest)."""
    header = stream.readline().rstrip("\n").split(",")
    expected = ["user_id", *FEATURE_NAMES, "label"]
    if header != expected:
        raise ValueError(f"feature CSV header mismatch: {header[:3]}...")
    ids, rows, labels = [], [], []
    for line in stream:
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(expected):
            raise ValueError(f"bad feature CSV row: {line!r}")
        ids.append(parts[0])
        rows.append([float(x) for x in parts[1:-1]])
        labels.append(1 if parts[-1] == "shill" else 0)
    values = np.array(rows, np.float64) if rows else np.zeros((0, len(FEATURE_NAMES)))
    return FeatureMatrix(ids, values, np.array(labels, np.int8))


def _fmt(x: float) -> str:
    return str(int(x)) if x == int(x) and abs(x) < 1e15 else repr(float(x))


def default_schema_hash() -> str:
    """Hash of the current 31-column manifest (what trained models pin to)."""
    empty = FeatureMatrix([], np.zeros((0, len(FEATURE_NAMES))), np.zeros(0, np.int8))
    return empty.schema_hash()


def last_transaction_dates(tg: TransactionMultigraph) -> dict[str, date]:
    """user_id -> date of latest buy/sell; users with no transactions omitted."""
    days = _last_transaction_days(tg)
    out = {}
    for v, user_id in enumerate(tg.users.ids):
        if days[v] >= 0:
            out[user_id] = datetime.fromtimestamp(
                int(days[v]) * _SECONDS_PER_DAY, tz=timezone.utc).date()
    return out
