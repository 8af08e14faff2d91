import numpy as np

from .base import Recommender


class Popularity(Recommender):
    """Recommend the most frequently interacted items to everyone.

    An item's score is its raw interaction count in the training data,
    regardless of rating, so every user receives the same ranking.
    """

    algorithm = "popularity"

    def __init__(self):
        pass

    def _fit(self, X):
        self.item_counts_ = np.bincount(X.items, minlength=X.n_items).astype(np.float64)

    def _score_pairs(self, uidx, iidx):
        out = np.zeros(len(iidx))
        known = iidx >= 0
        out[known] = self.item_counts_[iidx[known]]
        return out

    def _score_user(self, uidx):
        return self.item_counts_

    def _cold_user_scores(self):
        return self.item_counts_

    def _get_state(self):
        return {"item_counts": self.item_counts_}

    def _set_state(self, arrays):
        self.item_counts_ = arrays["item_counts"]
