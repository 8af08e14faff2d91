"""Random, chronological and stratified train/validation/test splitting.

All splitters return a :class:`Split` whose parts share the parent's
user/item id maps.  Part sizes come from largest-remainder rounding, with
ties going to the earlier part.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ._rng import derive_rng
from .exceptions import InvalidSpec, TooFewInteractions
from .interactions import InteractionSet

METHODS = ("random", "chrono", "stratified")


@dataclass(frozen=True)
class SplitSpec:
    ratios: tuple = (0.8, 0.2)
    seed: int = 0
    min_interactions: int = 1
    group_by: str = "user"

    def __post_init__(self):
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        if not 2 <= len(self.ratios) <= 3:
            raise InvalidSpec(f"expected 2 or 3 ratios, got {len(self.ratios)}")
        if any(not r > 0 for r in self.ratios):
            raise InvalidSpec(f"ratios must be positive, got {list(self.ratios)}")
        if abs(math.fsum(self.ratios) - 1.0) > 1e-9:
            raise InvalidSpec(f"ratios must sum to 1, got {list(self.ratios)} "
                              f"(sum {math.fsum(self.ratios)})")
        if self.group_by not in ("user", "item"):
            raise InvalidSpec(f"group_by must be 'user' or 'item', got {self.group_by!r}")
        if int(self.min_interactions) < 1:
            raise InvalidSpec("min_interactions must be >= 1")


@dataclass(frozen=True)
class Split:
    parts: list = field(default_factory=list)
    method: str = "random"

    @property
    def train(self):
        return self.parts[0]

    @property
    def test(self):
        return self.parts[-1]

    @property
    def validation(self):
        return self.parts[1] if len(self.parts) == 3 else None


def allocate(n, ratios):
    """Largest-remainder allocation of ``n`` items over ``ratios``.

    Sizes sum to ``n`` and each differs from ``ratio * n`` by less than one.
    Remainder ties go to the earlier part.
    """
    quotas = [r * n for r in ratios]
    # snap float noise such as 2.9999999999999996 to the integer it represents
    quotas = [round(q) if abs(q - round(q)) < 1e-9 else q for q in quotas]
    sizes = [int(math.floor(q)) for q in quotas]
    remainders = [q - s for q, s in zip(quotas, sizes)]
    leftover = n - sum(sizes)
    order = sorted(range(len(ratios)), key=lambda k: (-remainders[k], k))
    for k in order[:leftover]:
        sizes[k] += 1
    return sizes


def _allocate_group(n, ratios):
    """Per-group allocation that leaves no part empty.

    Only called for groups with at least ``len(ratios)`` members, so a part
    rounded down to zero can borrow one from the largest part.
    """
    sizes = allocate(n, ratios)
    for k in range(len(sizes)):
        if sizes[k] == 0:
            donor = max(range(len(sizes)), key=lambda j: (sizes[j], -j))
            sizes[donor] -= 1
            sizes[k] += 1
    return sizes


def _check_size(data, spec):
    if len(data) < len(spec.ratios):
        raise TooFewInteractions(
            f"{len(data)} interactions cannot fill {len(spec.ratios)} parts")


def random_split(data: InteractionSet, spec: SplitSpec) -> Split:
    """Shuffle all interactions with a seeded RNG and cut contiguous parts."""
    _check_size(data, spec)
    perm = derive_rng(spec.seed, "random_split").permutation(len(data))
    sizes = allocate(len(data), spec.ratios)
    bounds = np.cumsum([0] + sizes)
    parts = [data.take(perm[bounds[k]:bounds[k + 1]]) for k in range(len(sizes))]
    return Split(parts, "random")


def _groups(data, spec):
    keys = data.users if spec.group_by == "user" else data.items
    order = np.argsort(keys, kind="stable")
    starts = np.flatnonzero(np.r_[True, keys[order][1:] != keys[order][:-1]])
    ends = np.r_[starts[1:], len(order)]
    for s, e in zip(starts.tolist(), ends.tolist()):
        yield int(keys[order[s]]), order[s:e]


def _grouped_split(data, spec, method, arrange):
    _check_size(data, spec)
    m = len(spec.ratios)
    threshold = max(m, int(spec.min_interactions))
    buckets = [[] for _ in range(m)]
    for gid, positions in _groups(data, spec):
        if len(positions) < threshold:
            buckets[0].append(positions)
            continue
        ordered = arrange(gid, positions)
        sizes = _allocate_group(len(ordered), spec.ratios)
        bounds = np.cumsum([0] + sizes)
        for k in range(m):
            buckets[k].append(ordered[bounds[k]:bounds[k + 1]])
    parts = [data.take(np.concatenate(b) if b else np.empty(0, dtype=np.int64))
             for b in buckets]
    return Split(parts, method)


def chrono_split(data: InteractionSet, spec: SplitSpec) -> Split:
    """Per-group temporal split: earliest interactions go to the first part.

    Within each group interactions are ordered by timestamp, ties by input
    position.  Groups smaller than ``max(len(ratios), min_interactions)``
    go entirely to the first part.  No randomness is involved.
    """
    def arrange(gid, positions):
        # positions arrive in input order, so a stable sort keeps ties by position
        return positions[np.argsort(data.timestamps[positions], kind="stable")]

    return _grouped_split(data, spec, "chrono", arrange)


def stratified_split(data: InteractionSet, spec: SplitSpec) -> Split:
    """Per-group random split so each sufficiently large group is in every part.

    Each group is shuffled with its own stream derived from the seed and the
    group's dense id, so one group's split never depends on another's.
    """
    def arrange(gid, positions):
        return derive_rng(spec.seed, "stratified", gid).permutation(positions)

    return _grouped_split(data, spec, "stratified", arrange)


SPLITTERS = {"random": random_split, "chrono": chrono_split, "stratified": stratified_split}


def split(data: InteractionSet, method: str, spec: SplitSpec) -> Split:
    try:
        fn = SPLITTERS[method]
    except KeyError:
        raise InvalidSpec(f"unknown split method {method!r}; expected one of {METHODS}") from None
    return fn(data, spec)
