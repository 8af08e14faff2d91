"""Explicit-feedback matrix factorization by alternating least squares."""
import logging

import numpy as np

from .._rng import derive_rng
from .._validation import check_scalar
from ..interactions import to_sparse
from .base import Recommender

_log = logging.getLogger(__name__)


def ridge_solve(gram, rhs, reg):
    """Solve ``(gram + reg * I) x = rhs`` for a stack of systems.

    ``gram`` has shape ``(n, k, k)`` and ``rhs`` ``(n, k)``.  With ``reg > 0``
    and ``gram`` positive semi-definite the system matrix is positive
    definite, so the solve cannot be singular.
    """
    gram = np.asarray(gram, dtype=np.float64)
    rhs = np.asarray(rhs, dtype=np.float64)
    k = gram.shape[-1]
    A = gram + reg * np.eye(k)
    return np.linalg.solve(A, rhs[..., None])[..., 0]


def _half_step(indptr, indices, values, other, reg):
    """Exact ridge update of every row given the fixed opposite factors."""
    n_rows = len(indptr) - 1
    k = other.shape[1]
    counts = np.diff(indptr)
    gram = np.zeros((n_rows, k, k))
    rhs = np.zeros((n_rows, k))
    nonempty = counts > 0
    if values.size:
        M = other[indices]
        starts = indptr[:-1][nonempty]
        gram[nonempty] = np.add.reduceat(M[:, :, None] * M[:, None, :], starts, axis=0)
        rhs[nonempty] = np.add.reduceat(M * values[:, None], starts, axis=0)
    return ridge_solve(gram, rhs, reg)


def als_objective(rows, cols, values, user_factors, item_factors, reg):
    """Squared error over observed entries plus the L2 penalty on all factors."""
    pred = np.einsum("ij,ij->i", user_factors[rows], item_factors[cols])
    err = values - pred
    return float(err @ err + reg * (np.sum(user_factors ** 2) + np.sum(item_factors ** 2)))


class ALS(Recommender):
    """Matrix factorization trained by alternating exact ridge solves.

    Minimizes ``sum (r_ui - p_u . q_i)^2 + reg * (|P|^2 + |Q|^2)`` over the
    observed ratings (duplicates merged keeping the latest).  The penalty is
    not scaled by per-row counts, so every half-step is the exact minimizer
    of the objective in its block and the objective never increases.

    Parameters
    ----------
    factors : int
    regularization : float
    iterations : int
        Number of full (users then items) alternations.
    init_sigma : float
        Standard deviation of the Gaussian initialization.
    seed : int

    Attributes
    ----------
    user_factors_, item_factors_ : ndarray
    global_mean_ : float
        Prediction for any pair involving a cold user or item.
    loss_history_ : list of float
        Objective at initialization and after every half-step.
    """

    algorithm = "als"

    def __init__(self, factors=10, regularization=0.05, iterations=15, init_sigma=0.1, seed=0):
        self.factors = factors
        self.regularization = regularization
        self.iterations = iterations
        self.init_sigma = init_sigma
        self.seed = seed

    def _validate_params(self):
        check_scalar(self.factors, "factors", (int, np.integer), min_val=1)
        check_scalar(self.regularization, "regularization", (int, float, np.number),
                     min_val=0, include_min=False)
        check_scalar(self.iterations, "iterations", (int, np.integer), min_val=1)
        check_scalar(self.init_sigma, "init_sigma", (int, float, np.number),
                     min_val=0, include_min=False)

    def _fit(self, X):
        R = to_sparse(X, "last")
        Rt = R.to_scipy().T.tocsr()
        Rt.sort_indices()
        reg = float(self.regularization)
        rows = np.repeat(np.arange(R.rows), np.diff(R.indptr))
        self.global_mean_ = float(np.mean(R.data))

        sigma, f = self.init_sigma, self.factors
        P = derive_rng(self.seed, "als", "users").normal(0.0, sigma, (R.rows, f))
        Q = derive_rng(self.seed, "als", "items").normal(0.0, sigma, (R.cols, f))
        history = [als_objective(rows, R.indices, R.data, P, Q, reg)]
        for it in range(self.iterations):
            P = _half_step(R.indptr, R.indices, R.data, Q, reg)
            history.append(als_objective(rows, R.indices, R.data, P, Q, reg))
            Q = _half_step(Rt.indptr, Rt.indices, Rt.data, P, reg)
            history.append(als_objective(rows, R.indices, R.data, P, Q, reg))
            _log.debug("als iteration %d: objective %.6f", it + 1, history[-1])
        self.user_factors_ = P
        self.item_factors_ = Q
        self.loss_history_ = history

    def _score_pairs(self, uidx, iidx):
        out = np.full(len(uidx), self.global_mean_)
        known = (uidx >= 0) & (iidx >= 0)
        out[known] = np.einsum("ij,ij->i", self.user_factors_[uidx[known]],
                               self.item_factors_[iidx[known]])
        return out

    def _score_user(self, uidx):
        return self.item_factors_ @ self.user_factors_[uidx]

    def _cold_user_scores(self):
        return np.full(self.n_items_, self.global_mean_)

    def _get_state(self):
        return {"user_factors": self.user_factors_, "item_factors": self.item_factors_,
                "global_mean": np.array(self.global_mean_)}

    def _set_state(self, a):
        self.user_factors_ = a["user_factors"]
        self.item_factors_ = a["item_factors"]
        self.global_mean_ = float(a["global_mean"])
