"""Input validation helpers in the style of ``sklearn.utils.validation``."""
import numbers

import numpy as np

from .exceptions import EmptyDataset, NotFittedError
from .interactions import InteractionSet


def check_interactions(X, allow_empty=False) -> InteractionSet:
    """Coerce ``X`` to an :class:`InteractionSet`.

    Accepts an InteractionSet, or an iterable of ``(user, item)`` /
    ``(user, item, rating)`` / ``(user, item, rating, timestamp)`` tuples.
    """
    if not isinstance(X, InteractionSet):
        rows = []
        for rec in X:
            rec = tuple(rec)
            if len(rec) == 2:
                rec = rec + (1.0, 0)
            elif len(rec) == 3:
                rec = rec + (0,)
            rows.append(rec)
        X = InteractionSet.from_records(rows)
    if not allow_empty and len(X) == 0:
        raise EmptyDataset("training data is empty")
    return X


def check_is_fitted(estimator, attribute="item_ids_"):
    if not hasattr(estimator, attribute):
        raise NotFittedError(
            f"this {type(estimator).__name__} instance is not fitted yet; call fit first"
        )


def check_scalar(x, name, target_type, min_val=None, max_val=None, include_min=True):
    """Validate a scalar hyperparameter; returns it unchanged."""
    if isinstance(x, bool) or not isinstance(x, target_type):
        raise TypeError(f"{name} must be {target_type}, got {type(x).__name__}")
    if isinstance(x, numbers.Real) and not np.isfinite(x):
        raise ValueError(f"{name} must be finite")
    if min_val is not None:
        if include_min and x < min_val:
            raise ValueError(f"{name} == {x}, must be >= {min_val}")
        if not include_min and x <= min_val:
            raise ValueError(f"{name} == {x}, must be > {min_val}")
    if max_val is not None and x > max_val:
        raise ValueError(f"{name} == {x}, must be <= {max_val}")
    return x


def check_pairs(pairs):
    """Split a sequence of ``(user, item)`` pairs into two string lists."""
    if isinstance(pairs, InteractionSet):
        return ([pairs.user_ids[u] for u in pairs.users.tolist()],
                [pairs.item_ids[i] for i in pairs.items.tolist()])
    users, items = [], []
    for rec in pairs:
        users.append(str(rec[0]))
        items.append(str(rec[1]))
    return users, items
