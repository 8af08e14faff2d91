from collections import Counter

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_set
from oracles import largest_remainder
from recokit import InteractionSet, generate_synthetic
from recokit.exceptions import InvalidSpec, TooFewInteractions
from recokit.splitters import (
    SplitSpec,
    allocate,
    chrono_split,
    random_split,
    stratified_split,
)


def as_multiset(data):
    return Counter(data.interactions)


def assert_partition(parent, split):
    total = Counter()
    for part in split.parts:
        assert part.user_ids == parent.user_ids
        total += as_multiset(part)
    assert total == as_multiset(parent)
    assert sum(len(p) for p in split.parts) == len(parent)


def user_set(data):
    return {data.user_ids[u] for u in data.users.tolist()}


def one_user(timestamps, user="a"):
    return InteractionSet.from_records((user, f"i{k}", 1.0, t) for k, t in enumerate(timestamps))


@pytest.mark.parametrize("spec", [
    {"ratios": [0.5, 0.6]}, {"ratios": [1.0]}, {"ratios": [0.25] * 4}, {"ratios": [1.2, -0.2]},
    {"group_by": "session"}, {"min_interactions": 0},
])
def test_split_spec_validation(spec):
    with pytest.raises(InvalidSpec):
        SplitSpec(**spec)


def test_allocate_examples():
    assert allocate(10, [0.7, 0.3]) == [7, 3]
    # quotas 7.5 / 2.5 tie on remainder, earlier part wins
    assert allocate(10, [0.75, 0.25]) == [8, 2]
    assert allocate(10, [0.8, 0.1, 0.1]) == [8, 1, 1]


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10_000), st.lists(st.integers(1, 50), min_size=2, max_size=3))
def test_allocate_matches_oracle(n, weights):
    ratios = [w / sum(weights) for w in weights]
    sizes = allocate(n, ratios)
    assert sum(sizes) == n
    assert all(abs(s - r * n) < 1 for s, r in zip(sizes, ratios))
    assert sizes == largest_remainder(n, ratios)


def test_random_split_sizes_and_determinism():
    data = generate_synthetic(n_users=50, n_items=20, rank=2, density=1.0, seed=1).interactions
    data = data.take(np.arange(10))
    assert [len(p) for p in random_split(data, SplitSpec([0.7, 0.3], seed=3)).parts] == [7, 3]
    assert [len(p) for p in random_split(data, SplitSpec([0.75, 0.25], seed=9)).parts] == [8, 2]


def test_random_split_large_deterministic():
    data = generate_synthetic(n_users=1000, n_items=100, rank=2, density=1.0, seed=2).interactions
    assert len(data) == 100_000
    spec = SplitSpec([0.8, 0.1, 0.1], seed=42)
    a, b = random_split(data, spec), random_split(data, spec)
    for pa, pb in zip(a.parts, b.parts):
        assert pa == pb
    assert [len(p) for p in a.parts] == [80_000, 10_000, 10_000]
    assert_partition(data, a)


def test_random_split_seed_changes_result():
    data = generate_synthetic(n_users=30, n_items=30, rank=2, density=0.5, seed=2).interactions
    a = random_split(data, SplitSpec(seed=1)).train
    b = random_split(data, SplitSpec(seed=2)).train
    assert a != b


def test_too_few_interactions():
    data = one_user([1, 2])
    with pytest.raises(TooFewInteractions):
        random_split(data, SplitSpec([0.4, 0.3, 0.3]))
    with pytest.raises(TooFewInteractions):
        chrono_split(data.take([0]), SplitSpec([0.5, 0.5]))


def test_chrono_single_user():
    split = chrono_split(one_user([40, 10, 30, 20]), SplitSpec([0.75, 0.25]))
    assert sorted(split.train.timestamps.tolist()) == [10, 20, 30]
    assert split.test.timestamps.tolist() == [40]


def test_chrono_small_group_goes_to_train():
    data = InteractionSet.from_records(
        [("A", "x", 1.0, 5)] + [("B", f"i{k}", 1.0, k) for k in range(4)])
    split = chrono_split(data, SplitSpec([0.5, 0.5]))
    assert ("A", "x", 1.0, 5) in split.train.interactions
    assert "A" not in user_set(split.test)


def test_chrono_temporal_order_three_users():
    rng = np.random.default_rng(0)
    records = [(f"u{u}", f"i{k}", 1.0, int(rng.integers(0, 5)))
               for u in range(3) for k in range(10)]
    data = InteractionSet.from_records(records)
    split = chrono_split(data, SplitSpec([0.8, 0.2]))
    assert_partition(data, split)
    for u in range(3):
        # brute force: sort keys are (timestamp, input position)
        seq = sorted((rec.timestamp, pos, rec) for pos, rec in enumerate(data.interactions)
                     if rec.user == f"u{u}")
        expected_train = Counter(r for _, _, r in seq[:8])
        got_train = Counter(r for r in split.train.interactions if r.user == f"u{u}")
        assert got_train == expected_train
        train_ts = [r.timestamp for r in split.train.interactions if r.user == f"u{u}"]
        test_ts = [r.timestamp for r in split.test.interactions if r.user == f"u{u}"]
        assert max(train_ts) <= min(test_ts)


def test_chrono_ties_resolved_by_position():
    data = one_user([5, 5, 5, 5])
    split = chrono_split(data, SplitSpec([0.5, 0.5]))
    assert [data.item_ids[i] for i in split.train.items] == ["i0", "i1"]
    assert [data.item_ids[i] for i in split.test.items] == ["i2", "i3"]


def test_stratified_same_user_sets():
    rng = np.random.default_rng(4)
    records = [(f"u{u}", f"i{rng.integers(40)}", 1.0, 0)
               for u in range(30) for _ in range(int(rng.integers(3, 12)))]
    data = InteractionSet.from_records(records)
    split = stratified_split(data, SplitSpec([0.6, 0.2, 0.2], seed=5))
    assert_partition(data, split)
    assert user_set(split.parts[0]) == user_set(split.parts[1]) == user_set(split.parts[2])


def test_stratified_singleton_user_in_train_only():
    data = InteractionSet.from_records(
        [("solo", "x", 1.0, 0)] + [("busy", f"i{k}", 1.0, 0) for k in range(6)])
    split = stratified_split(data, SplitSpec([0.5, 0.5], seed=1))
    assert "solo" in user_set(split.train)
    assert "solo" not in user_set(split.test)


def test_stratified_exact_counts():
    records = [(f"u{u}", f"i{k}", 1.0, 0) for u in range(50) for k in range(10)]
    data = InteractionSet.from_records(records)
    split = stratified_split(data, SplitSpec([0.8, 0.2], seed=11))
    train_counts = Counter(r.user for r in split.train.interactions)
    test_counts = Counter(r.user for r in split.test.interactions)
    assert set(train_counts.values()) == {8}
    assert set(test_counts.values()) == {2}
    assert len(train_counts) == len(test_counts) == 50


def test_stratified_group_independence():
    """A group's split does not depend on which other groups are present."""
    records = [(f"u{u}", f"i{k}", 1.0, 0) for u in range(5) for k in range(10)]
    full = InteractionSet.from_records(records)
    spec = SplitSpec([0.7, 0.3], seed=3)
    first_user_only = InteractionSet.from_records(records[:10])
    a = [r for r in stratified_split(full, spec).test.interactions if r.user == "u0"]
    b = stratified_split(first_user_only, spec).test.interactions
    assert a == b


def test_stratified_by_item():
    records = [(f"u{k}", f"i{i}", 1.0, 0) for i in range(5) for k in range(6)]
    data = InteractionSet.from_records(records)
    split = stratified_split(data, SplitSpec([0.5, 0.5], seed=2, group_by="item"))
    items = [{p.item_ids[i] for i in p.items.tolist()} for p in split.parts]
    assert items[0] == items[1] == {f"i{i}" for i in range(5)}


def test_min_interactions_threshold():
    records = [("a", f"i{k}", 1.0, k) for k in range(4)] + [("b", f"i{k}", 1.0, k)
                                                            for k in range(8)]
    data = InteractionSet.from_records(records)
    split = stratified_split(data, SplitSpec([0.5, 0.5], seed=0, min_interactions=5))
    assert "a" not in user_set(split.test)
    assert "b" in user_set(split.test)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from([[0.8, 0.2], [0.5, 0.3, 0.2], [0.34, 0.66]]))
def test_all_splitters_partition(seed, ratios):
    data = random_set(np.random.default_rng(seed), n=80)
    spec = SplitSpec(ratios, seed=seed)
    for fn in (random_split, chrono_split, stratified_split):
        split = fn(data, spec)
        assert_partition(data, split)
        again = fn(data, spec)
        assert all(p == q for p, q in zip(split.parts, again.parts))
