"""Offline evaluation: rating-accuracy and top-k ranking metrics.

Sums go through :func:`math.fsum`, which is exactly rounded, so every metric
is independent of the order in which pairs or users are supplied.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EmptyJoin, InvalidCutoff, NoEvaluableUsers
from .interactions import InteractionSet, to_sparse

RATING_METRICS = ("rmse", "mae", "r_squared", "explained_variance")
RANKING_METRICS = ("precision_at_k", "recall_at_k", "ndcg_at_k", "map_at_k", "catalog_coverage")
REPORT_KEYS = RATING_METRICS + RANKING_METRICS + ("k", "n_users_evaluated")
LOWER_IS_BETTER = frozenset({"rmse", "mae"})

# r_squared / explained_variance when the truth has zero variance
UNDEFINED = None


@dataclass(frozen=True)
class RatingPairs:
    users: np.ndarray
    items: np.ndarray
    truth: np.ndarray
    predicted: np.ndarray
    dropped_truth: int = 0
    dropped_predictions: int = 0

    def __len__(self):
        return len(self.truth)


def join_rating_pairs(truth: InteractionSet, predictions) -> RatingPairs:
    """Inner-join truth ratings with ``(user, item, score)`` predictions.

    Ids are matched as strings against ``truth``'s external ids.  Duplicate
    truth pairs are merged keeping the latest; a duplicated prediction key
    keeps its last score.  Unmatched rows on either side are dropped and
    counted.
    """
    R = to_sparse(truth, "last")
    rows = np.repeat(np.arange(R.rows), np.diff(R.indptr))
    position = {(int(u), int(i)): k for k, (u, i) in enumerate(zip(rows, R.indices))}
    uindex, iindex = truth.user_index, truth.item_index
    scores = {}
    n_pred = 0
    for user, item, score in predictions:
        n_pred += 1
        u = uindex.get(str(user))
        i = iindex.get(str(item))
        if u is None or i is None:
            continue
        k = position.get((u, i))
        if k is not None:
            scores[k] = float(score)
    if not scores:
        raise EmptyJoin("no prediction matches a truth (user, item) pair")
    keep = np.array(sorted(scores), dtype=np.int64)
    predicted = np.array([scores[k] for k in keep.tolist()])
    if not np.all(np.isfinite(predicted)):
        raise ValueError("predictions must be finite")
    return RatingPairs(
        rows[keep], R.indices[keep], R.data[keep], predicted,
        dropped_truth=R.nnz - len(keep), dropped_predictions=n_pred - len(keep),
    )


def evaluate_rating(pairs: RatingPairs) -> dict:
    """RMSE, MAE, coefficient of determination and explained variance.

    ``r_squared`` and ``explained_variance`` are :data:`UNDEFINED` when the
    truth values have zero variance or fewer than two pairs exist.
    """
    t = np.asarray(pairs.truth, dtype=np.float64)
    p = np.asarray(pairs.predicted, dtype=np.float64)
    n = len(t)
    if n == 0:
        raise EmptyJoin("no rating pairs to evaluate")
    d = t - p
    out = {
        "rmse": math.sqrt(math.fsum((d * d).tolist()) / n),
        "mae": math.fsum(np.abs(d).tolist()) / n,
        "r_squared": UNDEFINED,
        "explained_variance": UNDEFINED,
    }
    if n >= 2:
        t_mean = math.fsum(t.tolist()) / n
        ss_tot = math.fsum(((t - t_mean) ** 2).tolist())
        if ss_tot > 0:
            d_mean = math.fsum(d.tolist()) / n
            ss_res = math.fsum((d * d).tolist())
            var_d = math.fsum(((d - d_mean) ** 2).tolist())
            out["r_squared"] = 1.0 - ss_res / ss_tot
            out["explained_variance"] = 1.0 - var_d / ss_tot
    return out


@dataclass
class RankedLists:
    """Per-user recommendation lists and relevant-item sets.

    ``recommended[u]`` is ordered best first; ``relevant[u]`` is non-empty
    for every evaluated user.  ``n_excluded`` counts test users dropped
    for having no relevant items.
    """

    recommended: dict
    relevant: dict
    n_items: int
    n_excluded: int = 0
    users: list = field(default_factory=list)

    def __post_init__(self):
        if not self.users:
            self.users = list(self.relevant)


def build_ranked_lists(truth: InteractionSet, recommendations: dict, n_items: int,
                       relevance_threshold=None) -> RankedLists:
    """Pair each test user's relevant items with their recommendation list.

    ``recommendations`` maps a user id to a best-first sequence of item ids
    or ``(item, score)`` pairs.  A test interaction is relevant when its
    rating is at least ``relevance_threshold`` (every interaction when
    ``None``).  Test users without a list are evaluated with an empty one.
    """
    relevant = {}
    for rec in truth:
        if relevance_threshold is not None and rec.rating < relevance_threshold:
            relevant.setdefault(rec.user, set())
            continue
        relevant.setdefault(rec.user, set()).add(rec.item)
    excluded = [u for u, items in relevant.items() if not items]
    for u in excluded:
        del relevant[u]
    recommended = {}
    for u in relevant:
        lst = recommendations.get(u, [])
        recommended[u] = [x[0] if isinstance(x, (tuple, list)) else x for x in lst]
    return RankedLists(recommended, relevant, n_items, len(excluded))


def _user_ranking_terms(recs, rel, k):
    hits = np.fromiter((item in rel for item in recs[:k]), dtype=bool, count=min(len(recs), k))
    n_hits = int(hits.sum())
    ranks = np.flatnonzero(hits) + 1
    dcg = math.fsum((1.0 / np.log2(ranks + 1)).tolist())
    n_ideal = min(len(rel), k)
    idcg = math.fsum((1.0 / np.log2(np.arange(2, n_ideal + 2))).tolist())
    # precision at each hit rank j is (hits up to j) / j
    ap = math.fsum((np.arange(1, n_hits + 1) / ranks).tolist()) / n_ideal
    return n_hits / k, n_hits / len(rel), dcg / idcg, ap


def evaluate_ranking(lists: RankedLists, k: int) -> dict:
    """Macro-averaged precision, recall, NDCG and MAP at ``k``, plus coverage.

    Gains are binary.  MAP normalizes by ``min(|relevant|, k)``.  Catalog
    coverage is the share of ``n_items`` appearing in any top-``k`` list.
    """
    if isinstance(k, bool) or int(k) != k or k < 1:
        raise InvalidCutoff(f"k must be a positive integer, got {k!r}")
    k = int(k)
    users = [u for u in lists.users if lists.relevant.get(u)]
    if not users:
        raise NoEvaluableUsers("no user has a relevant test item")
    terms = [_user_ranking_terms(lists.recommended.get(u, []), lists.relevant[u], k)
             for u in users]
    n = len(users)
    columns = list(zip(*terms))
    covered = set()
    for u in users:
        covered.update(lists.recommended.get(u, [])[:k])
    return {
        "precision_at_k": math.fsum(columns[0]) / n,
        "recall_at_k": math.fsum(columns[1]) / n,
        "ndcg_at_k": math.fsum(columns[2]) / n,
        "map_at_k": math.fsum(columns[3]) / n,
        "catalog_coverage": len(covered) / lists.n_items if lists.n_items else 0.0,
        "k": k,
        "n_users_evaluated": n,
    }


def metric_report(rating: dict | None = None, ranking: dict | None = None) -> dict:
    """Merge rating and ranking results into a report with the canonical keys."""
    report = dict.fromkeys(REPORT_KEYS)
    report.update(rating or {})
    report.update(ranking or {})
    return report
