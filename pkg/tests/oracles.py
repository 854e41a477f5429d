"""Slow, independent reference implementations used to cross-check the
package. Everything here is written the dumb way on purpose: bitwise CRC,
O(n^2) pair counting, exhaustive subset enumeration, classical Jacobi
rotations, dict-of-lists feature recounts. Nothing imports the modules it
is checking beyond plain data containers.
"""

from __future__ import annotations

import itertools
import math
from collections import defaultdict, deque
from datetime import date, timezone


# ---------------------------------------------------------------------------
# CRC-32 (reflected polynomial 0xEDB88320), bit by bit


def crc32_reference(data: bytes) -> int:
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ 0xEDB88320
            else:
                crc >>= 1
    return crc ^ 0xFFFFFFFF


# ---------------------------------------------------------------------------
# Ranking metrics


def auc_pair_count(scores, labels) -> float:
    """P(score_pos > score_neg) + 0.5 P(tie), by enumerating every pair."""
    pos = [s for s, y in zip(scores, labels) if y == 1]
    neg = [s for s, y in zip(scores, labels) if y == 0]
    if not pos or not neg:
        raise ValueError("need both classes")
    wins = 0.0
    for sp in pos:
        for sn in neg:
            if sp > sn:
                wins += 1.0
            elif sp == sn:
                wins += 0.5
    return wins / (len(pos) * len(neg))


def precision_at_k_reference(scores, labels, user_ids, k) -> float:
    order = sorted(range(len(scores)), key=lambda i: (-scores[i], user_ids[i]))
    top = order[: min(k, len(order))]
    return sum(labels[i] for i in top) / len(top)


# ---------------------------------------------------------------------------
# Graphs


def components_flood_fill(n, edges):
    """List of vertex sets (undirected), BFS from every unvisited vertex."""
    adj = defaultdict(set)
    for u, v in edges:
        if u != v:
            adj[u].add(v)
            adj[v].add(u)
    seen = [False] * n
    out = []
    for start in range(n):
        if seen[start]:
            continue
        comp = {start}
        seen[start] = True
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for w in adj[u]:
                if not seen[w]:
                    seen[w] = True
                    comp.add(w)
                    queue.append(w)
        out.append(comp)
    return out


def density_reference(n, m) -> float:
    return m / (n * (n - 1)) if n > 1 else 0.0


def maximal_cliques_subsets(n, adj):
    """All maximal cliques by testing every vertex subset. n <= ~15."""
    cliques = []
    vertices = list(range(n))
    for r in range(1, n + 1):
        for sub in itertools.combinations(vertices, r):
            if all(v in adj[u] for u, v in itertools.combinations(sub, 2)):
                s = set(sub)
                if not any(all(w in adj[u] or w == u for u in sub)
                           for w in vertices if w not in s):
                    cliques.append(frozenset(s))
    return set(cliques)


def maximal_cliques_bk_plain(adj):
    """Textbook Bron-Kerbosch, no pivoting, no vertex ordering."""
    out = set()

    def expand(r, p, x):
        if not p and not x:
            out.add(frozenset(r))
            return
        for v in sorted(p):
            expand(r | {v}, p & adj[v], x & adj[v])
            p = p - {v}
            x = x | {v}

    expand(set(), set(adj), set())
    return out


# ---------------------------------------------------------------------------
# Entropy / information gain


def entropy_reference(labels) -> float:
    n = len(labels)
    if n == 0:
        return 0.0
    h = 0.0
    for c in set(labels):
        p = sum(1 for y in labels if y == c) / n
        h -= p * math.log2(p)
    return h


def info_gain_with_cuts(values, labels, cuts) -> float:
    """Gain of partitioning `values` at the given ascending thresholds."""
    n = len(labels)
    bins = defaultdict(list)
    for v, y in zip(values, labels):
        b = 0
        for t in cuts:
            if v > t:
                b += 1
        bins[b].append(y)
    cond = sum(len(ys) / n * entropy_reference(ys) for ys in bins.values())
    return entropy_reference(labels) - cond


def info_gain_categorical(values, labels) -> float:
    n = len(labels)
    groups = defaultdict(list)
    for v, y in zip(values, labels):
        groups[v].append(y)
    cond = sum(len(ys) / n * entropy_reference(ys) for ys in groups.values())
    return entropy_reference(labels) - cond


# ---------------------------------------------------------------------------
# Symmetric eigen-decomposition: classical Jacobi rotations


def jacobi_eigh(matrix, sweeps=100, tol=1e-12):
    """Eigenvalues/vectors of a symmetric matrix via Jacobi rotations.

    Returns (eigenvalues desc, columns of eigenvectors in matching order).
    Pure python lists in, lists out.
    """
    n = len(matrix)
    a = [row[:] for row in matrix]
    v = [[1.0 if i == j else 0.0 for j in range(n)] for i in range(n)]
    for _ in range(sweeps):
        off = math.sqrt(sum(a[i][j] ** 2 for i in range(n)
                            for j in range(n) if i != j))
        if off < tol:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if abs(a[p][q]) < tol / (n * n + 1):
                    continue
                theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q])
                t = (1.0 if theta >= 0 else -1.0) / (
                    abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                for k in range(n):
                    akp, akq = a[k][p], a[k][q]
                    a[k][p] = c * akp - s * akq
                    a[k][q] = s * akp + c * akq
                for k in range(n):
                    apk, aqk = a[p][k], a[q][k]
                    a[p][k] = c * apk - s * aqk
                    a[q][k] = s * apk + c * aqk
                for k in range(n):
                    vkp, vkq = v[k][p], v[k][q]
                    v[k][p] = c * vkp - s * vkq
                    v[k][q] = s * vkp + c * vkq
    eig = [(a[i][i], [v[k][i] for k in range(n)]) for i in range(n)]
    eig.sort(key=lambda t: -t[0])
    return [e for e, _ in eig], [vec for _, vec in eig]


# ---------------------------------------------------------------------------
# Per-user feature recount straight from record lists


def recount_features(user_id, transactions, feedback, profile):
    """Dict of all 31 features for one user, computed with plain dicts.

    `transactions` / `feedback` are the package's record dataclasses but
    only their public fields are touched; no graph machinery involved.
    """
    buys = [t for t in transactions if t.buyer_id == user_id]
    sells = [t for t in transactions if t.seller_id == user_id]
    out_partners = {t.seller_id for t in buys}
    in_partners = {t.buyer_id for t in sells}

    def cents(x):
        return x / 100.0

    f = {
        "Buy-Trans-Num": len(buys),
        "Sell-Trans-Num": len(sells),
        "Unique-Sellers": len(out_partners),
        "Unique-Buyers": len(in_partners),
        "Bidir-Trans-Users": len(out_partners & in_partners),
        "Max-Buy-Price": cents(max((t.amount_cents for t in buys), default=0)),
        "Min-Buy-Price": cents(min((t.amount_cents for t in buys), default=0)),
        "Max-Buy-Quantity": max((t.quantity for t in buys), default=0),
        "Total-Buy-Quantity": sum(t.quantity for t in buys),
        "Total-Buy-Amount": cents(sum(t.amount_cents for t in buys)),
        "Max-Sell-Price": cents(max((t.amount_cents for t in sells), default=0)),
        "Min-Sell-Price": cents(min((t.amount_cents for t in sells), default=0)),
        "Max-Sell-Quantity": max((t.quantity for t in sells), default=0),
        "Total-Sell-Quantity": sum(t.quantity for t in sells),
        "Total-Sell-Amount": cents(sum(t.amount_cents for t in sells)),
    }

    given = [r for r in feedback if r.giver_id == user_id]
    received = [r for r in feedback if r.receiver_id == user_id]
    gvn_partners = {r.receiver_id for r in given}
    rcv_partners = {r.giver_id for r in received}
    f.update({
        "Gvn-Fdbk-Num": len(given),
        "Rcv-Fdbk-Num": len(received),
        "Gvn-Unique-Fdbk": len(gvn_partners),
        "Rcv-Unique-Fdbk": len(rcv_partners),
        "Bidir-Fdbk-Users": len(gvn_partners & rcv_partners),
        "Gvn-Pos-Fdbk": sum(1 for r in given if r.rating == 1),
        "Gvn-Neg-Fdbk": sum(1 for r in given if r.rating == -1),
        "Rcv-Pos-Fdbk": sum(1 for r in received if r.rating == 1),
        "Rcv-Neg-Fdbk": sum(1 for r in received if r.rating == -1),
        "Gvn-Fdbk-RSum": sum(r.rating for r in given),
        "Rcv-Fdbk-RSum": sum(r.rating for r in received),
        "Gvn-Fdbk-Avg": (sum(r.rating for r in given) / len(given)) if given else 0.0,
        "Rcv-Fdbk-Avg": (sum(r.rating for r in received) / len(received))
                        if received else 0.0,
    })

    activity_ts = [t.timestamp for t in buys + sells]
    if profile is None:
        f.update({"Birth-Year": 0, "State-Hash": crc32_reference(b""),
                  "Active-Days": 0})
    else:
        active = 0
        if activity_ts:
            last_day = max(int(t.timestamp()) for t in activity_ts) // 86400
            reg_day = (profile.registration_date - date(1970, 1, 1)).days
            active = max(last_day - reg_day, 0)
        f.update({
            "Birth-Year": profile.birth_year or 0,
            "State-Hash": crc32_reference(profile.state_text.encode("utf-8")),
            "Active-Days": active,
        })
    return f
