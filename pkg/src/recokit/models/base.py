"""Common estimator machinery for recommenders.

Every model follows the scikit-learn estimator conventions: hyperparameters
are stored verbatim by ``__init__`` (so ``get_params``/``set_params`` and
``sklearn.base.clone`` work), validated in ``fit``, and learned state lives
in attributes with a trailing underscore.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator

from .._validation import check_interactions, check_is_fitted, check_pairs
from ..interactions import InteractionSet


def rank_items(scores, k=None, exclude=None):
    """Indices of the top-``k`` items by descending score.

    Ties go to the lower item index.  ``exclude`` is an index array of items
    to drop before the cutoff.
    """
    scores = np.asarray(scores, dtype=np.float64)
    candidates = np.arange(len(scores))
    if exclude is not None and len(exclude):
        mask = np.ones(len(scores), dtype=bool)
        mask[exclude] = False
        candidates = candidates[mask]
    cand_scores = scores[candidates]
    # lexsort: last key is primary
    order = np.lexsort((candidates, -cand_scores))
    if k is not None:
        order = order[:k]
    return candidates[order]


class Recommender(BaseEstimator):
    """Base class: fit on interactions, score (user, item) pairs, rank items.

    Subclasses implement ``_fit``, ``_score_pairs`` and ``_score_user``.
    Users and items are addressed by their external (string) ids; ids not
    seen during ``fit`` get the model's cold-start fallback.
    """

    algorithm = None

    def fit(self, X, y=None):
        """Fit the model on training interactions.

        Parameters
        ----------
        X : InteractionSet or iterable of (user, item[, rating[, timestamp]])
        y : ignored
        """
        X = check_interactions(X).compact()
        self._validate_params()
        self.user_ids_ = X.user_ids
        self.item_ids_ = X.item_ids
        self.user_index_ = X.user_index
        self.item_index_ = X.item_index
        self.n_users_ = X.n_users
        self.n_items_ = X.n_items
        self.seen_ = X.seen_matrix()
        self._fit(X)
        return self

    def _validate_params(self):
        pass

    def _fit(self, X: InteractionSet):
        raise NotImplementedError

    def _score_pairs(self, uidx, iidx):
        """Scores for dense index arrays; -1 marks a cold user or item."""
        raise NotImplementedError

    def _score_user(self, uidx):
        """Scores over all items for a known user index."""
        raise NotImplementedError

    def _cold_user_scores(self):
        """Scores over all items for users absent from training."""
        raise NotImplementedError

    def _lookup(self, users, items):
        uidx = np.fromiter((self.user_index_.get(u, -1) for u in users), np.int64, len(users))
        iidx = np.fromiter((self.item_index_.get(i, -1) for i in items), np.int64, len(items))
        return uidx, iidx

    def predict(self, X):
        """Score each ``(user, item)`` pair in ``X``; returns an array in input order."""
        check_is_fitted(self)
        users, items = check_pairs(X)
        if not users:
            return np.empty(0, dtype=np.float64)
        uidx, iidx = self._lookup(users, items)
        return np.asarray(self._score_pairs(uidx, iidx), dtype=np.float64)

    def predict_one(self, user, item) -> float:
        return float(self.predict([(user, item)])[0])

    def recommend(self, user, k=10, remove_seen=True):
        """Top-``k`` ``(item, score)`` pairs for ``user``, best first."""
        check_is_fitted(self)
        if k < 1:
            raise ValueError("k must be >= 1")
        u = self.user_index_.get(str(user), -1)
        exclude = None
        if u < 0:
            user_scores = self._cold_user_scores()
        else:
            user_scores = self._score_user(u)
            if remove_seen:
                exclude = self.seen_.indices[self.seen_.indptr[u]:self.seen_.indptr[u + 1]]
        top = rank_items(user_scores, k, exclude)
        scores = user_scores[top]
        return [(self.item_ids_[i], float(s)) for i, s in zip(top.tolist(), scores.tolist())]

    def recommend_all(self, users, k=10, remove_seen=True):
        """Dict of user -> recommendation list for every user in ``users``."""
        return {u: self.recommend(u, k, remove_seen) for u in users}

    # serialization hooks
    def _get_state(self) -> dict:
        raise NotImplementedError

    def _set_state(self, arrays: dict):
        raise NotImplementedError


def predict_batch(model: Recommender, pairs):
    """Score a list of ``(user, item)`` pairs, preserving order."""
    return model.predict(list(pairs)).tolist()
