"""Biased matrix factorization trained by stochastic gradient descent."""
import numpy as np
from numba import njit

from .._rng import derive_rng
from .._validation import check_scalar
from ..exceptions import Divergence
from .base import Recommender


@njit(cache=True)
def _sgd_epoch(order, users, items, ratings, mu, bu, bi, P, Q, lr, reg):
    k = P.shape[1]
    for idx in order:
        u = users[idx]
        i = items[idx]
        pred = mu + bu[u] + bi[i]
        for f in range(k):
            pred += P[u, f] * Q[i, f]
        e = ratings[idx] - pred
        bu[u] += lr * (e - reg * bu[u])
        bi[i] += lr * (e - reg * bi[i])
        for f in range(k):
            puf = P[u, f]
            qif = Q[i, f]
            P[u, f] += lr * (e * qif - reg * puf)
            Q[i, f] += lr * (e * puf - reg * qif)


class SGDMF(Recommender):
    """Rating prediction ``mu + b_u + b_i + p_u . q_i`` fit by per-sample SGD.

    Each epoch visits every training interaction once in a seeded shuffled
    order.  Cold users or items contribute zero bias and zero factors, so a
    pair with both unseen predicts the global mean.

    Raises :class:`~recokit.exceptions.Divergence` if any parameter becomes
    non-finite.
    """

    algorithm = "sgd_mf"

    def __init__(self, factors=10, learning_rate=0.005, regularization=0.02, epochs=20,
                 init_sigma=0.1, seed=0):
        self.factors = factors
        self.learning_rate = learning_rate
        self.regularization = regularization
        self.epochs = epochs
        self.init_sigma = init_sigma
        self.seed = seed

    def _validate_params(self):
        real = (int, float, np.number)
        check_scalar(self.factors, "factors", (int, np.integer), min_val=1)
        check_scalar(self.learning_rate, "learning_rate", real, min_val=0)
        check_scalar(self.regularization, "regularization", real, min_val=0)
        check_scalar(self.epochs, "epochs", (int, np.integer), min_val=1)
        check_scalar(self.init_sigma, "init_sigma", real, min_val=0, include_min=False)

    def _fit(self, X):
        init = derive_rng(self.seed, "sgd_mf", "init")
        P = init.normal(0.0, self.init_sigma, (X.n_users, self.factors))
        Q = init.normal(0.0, self.init_sigma, (X.n_items, self.factors))
        bu = np.zeros(X.n_users)
        bi = np.zeros(X.n_items)
        mu = float(np.mean(X.ratings))
        lr, reg = float(self.learning_rate), float(self.regularization)
        for epoch in range(self.epochs):
            order = derive_rng(self.seed, "sgd_mf", "epoch", epoch).permutation(len(X))
            _sgd_epoch(order, X.users, X.items, X.ratings, mu, bu, bi, P, Q, lr, reg)
            if not (np.isfinite(P).all() and np.isfinite(Q).all()
                    and np.isfinite(bu).all() and np.isfinite(bi).all()):
                raise Divergence(epoch + 1)
        self.global_mean_ = mu
        self.user_bias_ = bu
        self.item_bias_ = bi
        self.user_factors_ = P
        self.item_factors_ = Q

    def _score_pairs(self, uidx, iidx):
        out = np.full(len(uidx), self.global_mean_)
        ku, ki = uidx >= 0, iidx >= 0
        out[ku] += self.user_bias_[uidx[ku]]
        out[ki] += self.item_bias_[iidx[ki]]
        both = ku & ki
        out[both] += np.einsum("ij,ij->i", self.user_factors_[uidx[both]],
                               self.item_factors_[iidx[both]])
        return out

    def _score_user(self, uidx):
        return (self.global_mean_ + self.user_bias_[uidx] + self.item_bias_
                + self.item_factors_ @ self.user_factors_[uidx])

    def _cold_user_scores(self):
        return self.global_mean_ + self.item_bias_

    def _get_state(self):
        return {"user_factors": self.user_factors_, "item_factors": self.item_factors_,
                "user_bias": self.user_bias_, "item_bias": self.item_bias_,
                "global_mean": np.array(self.global_mean_)}

    def _set_state(self, a):
        self.user_factors_ = a["user_factors"]
        self.item_factors_ = a["item_factors"]
        self.user_bias_ = a["user_bias"]
        self.item_bias_ = a["item_bias"]
        self.global_mean_ = float(a["global_mean"])
