"""Recommender algorithms sharing the :class:`Recommender` estimator contract."""
from .als import ALS, als_objective, ridge_solve
from .base import Recommender, predict_batch, rank_items
from .io import load_model, save_model
from .popularity import Popularity
from .sar import SAR, sar_affinity, sar_cooccurrence, sar_similarity
from .sgd import SGDMF

ALGORITHMS = {cls.algorithm: cls for cls in (Popularity, SAR, ALS, SGDMF)}


def make_model(algorithm, **params):
    """Instantiate a model from its algorithm tag."""
    try:
        cls = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(
            f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}") from None
    return cls(**params)


def fit_popularity(train):
    return Popularity().fit(train)


def fit_sar(train, **params):
    return SAR(**params).fit(train)


def fit_als(train, **params):
    return ALS(**params).fit(train)


def fit_sgd_mf(train, **params):
    return SGDMF(**params).fit(train)


__all__ = [
    "ALGORITHMS", "ALS", "Popularity", "Recommender", "SAR", "SGDMF", "als_objective",
    "fit_als", "fit_popularity", "fit_sar", "fit_sgd_mf", "load_model", "make_model",
    "predict_batch", "rank_items", "ridge_solve", "sar_affinity", "sar_cooccurrence",
    "sar_similarity", "save_model",
]
