"""Simple Algorithm for Recommendation (SAR).

SAR scores items by combining a user-item affinity matrix ``A`` with an
item-item similarity matrix ``S`` derived from co-occurrence counts; the
score for user ``u`` and item ``i`` is ``(A @ S)[u, i]``.
"""
import numpy as np
import scipy.sparse as sp

from .._validation import check_scalar
from ..exceptions import InvalidReferenceTime
from ..interactions import InteractionSet, to_sparse
from .base import Recommender

SIMILARITIES = ("count", "jaccard", "lift")


def sar_cooccurrence(train: InteractionSet) -> sp.csr_matrix:
    """Item x item matrix of how many users interacted with both items.

    The diagonal holds each item's distinct-user count.
    """
    B = to_sparse(train, "max").binary().to_scipy()
    C = (B.T @ B).tocsr()
    C.sort_indices()
    return C


def sar_similarity(C, kind="jaccard") -> sp.csr_matrix:
    """Turn a co-occurrence matrix into an item similarity matrix.

    ``count`` returns ``C`` itself, ``jaccard`` divides by
    ``c_ii + c_jj - c_ij`` and ``lift`` by ``c_ii * c_jj``.  Entries whose
    denominator is zero are set to 0.
    """
    if kind not in SIMILARITIES:
        raise ValueError(f"unknown similarity {kind!r}; expected one of {SIMILARITIES}")
    C = sp.csr_matrix(C, dtype=np.float64)
    if kind == "count":
        return C
    diag = C.diagonal()
    coo = C.tocoo()
    r, c, v = coo.row, coo.col, coo.data
    if kind == "jaccard":
        denom = diag[r] + diag[c] - v
    else:
        denom = diag[r] * diag[c]
    with np.errstate(divide="ignore", invalid="ignore"):
        vals = np.where(denom != 0, v / np.where(denom != 0, denom, 1.0), 0.0)
    S = sp.csr_matrix((vals, (r, c)), shape=C.shape)
    S.sort_indices()
    return S


def sar_affinity(train: InteractionSet, half_life_seconds=None, reference_time=None,
                 rating_as_weight=False) -> sp.csr_matrix:
    """User x item affinity with optional exponential half-life decay.

    Each event contributes ``w * 2 ** (-(reference_time - t) / half_life)``,
    where ``w`` is the rating when ``rating_as_weight`` is set and 1
    otherwise.  ``reference_time`` defaults to the latest training timestamp.
    """
    if reference_time is None:
        reference_time = int(train.timestamps.max()) if len(train) else 0
    elif len(train) and reference_time < train.timestamps.max():
        raise InvalidReferenceTime(
            f"reference_time {reference_time} precedes latest event {train.timestamps.max()}"
        )
    weights = train.ratings.copy() if rating_as_weight else np.ones(len(train))
    if half_life_seconds is not None:
        age = (reference_time - train.timestamps).astype(np.float64)
        weights *= np.exp2(-age / half_life_seconds)
    decayed = InteractionSet(train.users, train.items, weights, train.timestamps,
                             train.user_ids, train.item_ids)
    return to_sparse(decayed, "sum").to_scipy()


class SAR(Recommender):
    """Item-similarity recommender over time-decayed affinities.

    Parameters
    ----------
    similarity : {"count", "jaccard", "lift"}
    half_life_seconds : float or None
        Decay half-life; ``None`` disables decay.
    reference_time : int or None
        Time the decay is measured from; defaults to the latest training event.
    rating_as_weight : bool
        Weight events by their rating instead of 1.
    """

    algorithm = "sar"

    def __init__(self, similarity="jaccard", half_life_seconds=None, reference_time=None,
                 rating_as_weight=False):
        self.similarity = similarity
        self.half_life_seconds = half_life_seconds
        self.reference_time = reference_time
        self.rating_as_weight = rating_as_weight

    def _validate_params(self):
        if self.similarity not in SIMILARITIES:
            raise ValueError(f"similarity must be one of {SIMILARITIES}")
        if self.half_life_seconds is not None:
            check_scalar(self.half_life_seconds, "half_life_seconds", (int, float, np.number),
                         min_val=0, include_min=False)

    def _fit(self, X):
        self.affinity_ = sar_affinity(X, self.half_life_seconds, self.reference_time,
                                      self.rating_as_weight)
        self.similarity_ = sar_similarity(sar_cooccurrence(X), self.similarity)
        self.item_counts_ = np.bincount(X.items, minlength=X.n_items).astype(np.float64)

    def _score_user(self, uidx):
        return np.asarray((self.affinity_[uidx] @ self.similarity_).todense()).ravel()

    def _score_pairs(self, uidx, iidx):
        out = np.zeros(len(uidx))
        known = (uidx >= 0) & (iidx >= 0)
        if known.any():
            A = self.affinity_[uidx[known]]
            S = self.similarity_.T.tocsr()[iidx[known]]
            out[known] = np.asarray(A.multiply(S).sum(axis=1)).ravel()
        return out

    def _cold_user_scores(self):
        return self.item_counts_

    def _get_state(self):
        A, S = self.affinity_, self.similarity_
        return {
            "affinity_data": A.data, "affinity_indices": A.indices, "affinity_indptr": A.indptr,
            "similarity_data": S.data, "similarity_indices": S.indices,
            "similarity_indptr": S.indptr, "item_counts": self.item_counts_,
        }

    def _set_state(self, a):
        n_u, n_i = self.n_users_, self.n_items_
        self.affinity_ = sp.csr_matrix(
            (a["affinity_data"], a["affinity_indices"], a["affinity_indptr"]), shape=(n_u, n_i))
        self.similarity_ = sp.csr_matrix(
            (a["similarity_data"], a["similarity_indices"], a["similarity_indptr"]),
            shape=(n_i, n_i))
        self.item_counts_ = a["item_counts"]
