"""Grid and random hyperparameter search.

Every trial fits a fresh model on the training set with a seed derived from
the base seed and the trial index, then scores it on the validation set.
Random draws come from streams keyed by ``(seed, trial_index, axis name)``,
so adding axes or trials never changes earlier draws and trials can run in
any order.
"""
from __future__ import annotations

import itertools
import logging
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from ._rng import derive_rng, mix
from .exceptions import BudgetExceeded, ContinuousAxisInGrid, InvalidSpec, RecokitError
from .metrics import (
    LOWER_IS_BETTER,
    REPORT_KEYS,
    build_ranked_lists,
    evaluate_ranking,
    evaluate_rating,
    join_rating_pairs,
)
from .models import make_model

_log = logging.getLogger(__name__)

DEFAULT_GRID_BUDGET = 1000


@dataclass(frozen=True)
class Range:
    """Continuous search axis; ``integer`` rounds draws to the nearest int."""

    low: float
    high: float
    scale: str = "linear"
    integer: bool = False

    def __post_init__(self):
        if not self.low < self.high:
            raise InvalidSpec(f"range needs low < high, got [{self.low}, {self.high}]")
        if self.scale not in ("linear", "log"):
            raise InvalidSpec(f"unknown scale {self.scale!r}")
        if self.scale == "log" and self.low <= 0:
            raise InvalidSpec("log-scale range requires low > 0")

    def draw(self, rng):
        if self.scale == "log":
            value = math.exp(rng.uniform(math.log(self.low), math.log(self.high)))
        else:
            value = rng.uniform(self.low, self.high)
        return int(round(value)) if self.integer else float(value)


@dataclass
class ParamSpace:
    """Search domain: parameter name -> list of values or :class:`Range`."""

    algorithm: str
    axes: dict
    fixed: dict = field(default_factory=dict)

    def __post_init__(self):
        axes = {}
        for name, axis in self.axes.items():
            if isinstance(axis, dict):
                axis = Range(**axis)
            elif not isinstance(axis, Range):
                axis = list(axis)
                if not axis:
                    raise InvalidSpec(f"axis {name!r} has no values")
            axes[name] = axis
        self.axes = axes

    @property
    def names(self):
        return sorted(self.axes)

    def grid(self):
        """Cartesian product in lexicographic axis order (axes sorted by name)."""
        for name in self.names:
            if isinstance(self.axes[name], Range):
                raise ContinuousAxisInGrid(f"axis {name!r} is continuous")
        names = self.names
        for combo in itertools.product(*(self.axes[n] for n in names)):
            yield dict(zip(names, combo))

    def grid_size(self):
        return math.prod(len(self.axes[n]) for n in self.names)

    def sample(self, seed, trial_index):
        params = {}
        for name in self.names:
            axis = self.axes[name]
            rng = derive_rng(seed, "random_search", trial_index, name)
            if isinstance(axis, Range):
                params[name] = axis.draw(rng)
            else:
                params[name] = axis[int(rng.integers(len(axis)))]
        return params


@dataclass(frozen=True)
class Objective:
    metric: str = "ndcg_at_k"
    direction: str | None = None
    k: int = 10
    relevance_threshold: float | None = None

    def __post_init__(self):
        if self.metric not in REPORT_KEYS or self.metric in ("k", "n_users_evaluated"):
            raise InvalidSpec(f"unknown objective metric {self.metric!r}")
        if self.direction is None:
            object.__setattr__(self, "direction",
                               "minimize" if self.metric in LOWER_IS_BETTER else "maximize")
        if self.direction not in ("minimize", "maximize"):
            raise InvalidSpec(f"direction must be minimize or maximize, got {self.direction!r}")


@dataclass
class Trial:
    trial_index: int
    params: dict
    objective: str
    value: float | None
    wall_time: float
    failed: bool = False
    error: str | None = None

    def to_dict(self):
        return asdict(self)


@dataclass
class SearchResult:
    trials: list
    best: Trial | None


def score_model(model, validation, objective: Objective):
    """Evaluate a fitted model on ``validation`` for one objective metric."""
    if objective.metric in ("rmse", "mae", "r_squared", "explained_variance"):
        preds = model.predict(validation)
        triples = zip(
            (validation.user_ids[u] for u in validation.users.tolist()),
            (validation.item_ids[i] for i in validation.items.tolist()),
            preds.tolist(),
        )
        return evaluate_rating(join_rating_pairs(validation, triples))[objective.metric]
    users = list(dict.fromkeys(validation.user_ids[u] for u in validation.users.tolist()))
    recs = model.recommend_all(users, objective.k, remove_seen=True)
    lists = build_ranked_lists(validation, recs, model.n_items_, objective.relevance_threshold)
    return evaluate_ranking(lists, objective.k)[objective.metric]


def select_best(trials, objective: Objective):
    """Best successful trial; ties go to the lowest trial index."""
    ok = [t for t in trials if not t.failed and t.value is not None]
    if not ok:
        return None
    sign = 1.0 if objective.direction == "minimize" else -1.0
    return min(ok, key=lambda t: (sign * t.value, t.trial_index))


def _run_trial(index, params, space, train, validation, objective, base_seed):
    start = time.perf_counter()
    bound = {**space.fixed, **params}
    try:
        model = make_model(space.algorithm, **bound)
        if "seed" in model.get_params() and "seed" not in bound:
            model.set_params(seed=mix(base_seed, index))
        model.fit(train)
        value = score_model(model, validation, objective)
        if value is None or not np.isfinite(value):
            raise ValueError(f"objective {objective.metric} is undefined")
        return Trial(index, params, objective.metric, float(value),
                     time.perf_counter() - start)
    except (RecokitError, ValueError, TypeError, ArithmeticError) as exc:
        _log.warning("trial %d failed: %s", index, exc)
        return Trial(index, params, objective.metric, None, time.perf_counter() - start,
                     failed=True, error=f"{type(exc).__name__}: {exc}")


def _execute(configs, space, train, validation, objective, seed, workers):
    jobs = [(i, p, space, train, validation, objective, seed) for i, p in enumerate(configs)]
    if workers and workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(lambda j: _run_trial(*j), jobs))
    else:
        trials = [_run_trial(*j) for j in jobs]
    trials.sort(key=lambda t: t.trial_index)
    return SearchResult(trials, select_best(trials, objective))


def grid_search(space: ParamSpace, train, validation, objective: Objective, seed=0,
                budget=DEFAULT_GRID_BUDGET, workers=1) -> SearchResult:
    """Evaluate every point of a discrete grid."""
    configs = list(space.grid())
    if len(configs) > budget:
        raise BudgetExceeded(f"grid has {len(configs)} points, budget is {budget}")
    return _execute(configs, space, train, validation, objective, seed, workers)


def random_search(space: ParamSpace, budget: int, train, validation, objective: Objective,
                  seed=0, workers=1) -> SearchResult:
    """Evaluate ``budget`` independently drawn configurations."""
    if budget < 1:
        raise InvalidSpec("budget must be >= 1")
    configs = [space.sample(seed, t) for t in range(budget)]
    return _execute(configs, space, train, validation, objective, seed, workers)
