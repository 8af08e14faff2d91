import math

import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

import oracles
from conftest import random_set
from recokit import InteractionSet
from recokit.exceptions import Divergence, InvalidReferenceTime, NotFittedError
from recokit.models import (
    ALS,
    SAR,
    SGDMF,
    Popularity,
    als_objective,
    load_model,
    make_model,
    predict_batch,
    ridge_solve,
    sar_affinity,
    sar_cooccurrence,
    sar_similarity,
    save_model,
)

ALL_MODELS = [
    Popularity(),
    SAR(),
    SAR(similarity="lift", half_life_seconds=10.0),
    SAR(similarity="count", rating_as_weight=True),
    ALS(factors=3, iterations=3),
    SGDMF(factors=3, epochs=3),
]


def records(rows):
    return InteractionSet.from_records(rows)


# --- popularity -------------------------------------------------------------


def popularity_data():
    rows = ([(f"u{k}", "i0", 1.0, 0) for k in range(5)]
            + [(f"u{k}", "i1", 1.0, 0) for k in range(2)]
            + [(f"v{k}", "i2", 1.0, 0) for k in range(7)])
    return records(rows)


def test_popularity_order():
    model = Popularity().fit(popularity_data())
    assert [i for i, _ in model.recommend("stranger", 3)] == ["i2", "i0", "i1"]
    assert model.predict([("anyone", "i0")]).tolist() == [5.0]


def test_popularity_ties_and_mask():
    data = records([("a", "x", 1.0, 0), ("b", "y", 1.0, 0), ("c", "z", 1.0, 0),
                    ("c", "z", 1.0, 1)])
    model = Popularity().fit(data)
    assert [i for i, _ in model.recommend("new", 3)] == ["z", "x", "y"]
    model = Popularity().fit(popularity_data())
    assert [i for i, _ in model.recommend("v0", 3, remove_seen=True)] == ["i0", "i1"]


# --- SAR --------------------------------------------------------------------


def sar_toy():
    return records([("u0", "i0", 1.0, 0), ("u0", "i1", 1.0, 0), ("u1", "i0", 1.0, 0)])


def test_cooccurrence_example():
    C = sar_cooccurrence(sar_toy()).toarray()
    assert C.tolist() == [[2, 1], [1, 1]]
    assert sar_cooccurrence(records([("u", "i", 1.0, 0)])).toarray().tolist() == [[1]]


def test_cooccurrence_disjoint_is_diagonal():
    C = sar_cooccurrence(records([("a", "x", 1.0, 0), ("b", "y", 1.0, 0),
                                  ("b", "y", 1.0, 3)])).toarray()
    assert np.count_nonzero(C - np.diag(np.diag(C))) == 0
    assert np.diag(C).tolist() == [1, 1]


def test_similarity_examples():
    C = sar_cooccurrence(sar_toy())
    J = sar_similarity(C, "jaccard").toarray()
    assert J[0, 1] == pytest.approx(0.5) and J[1, 0] == J[0, 1]
    assert J[0, 0] == 1.0 and J[1, 1] == 1.0
    L = sar_similarity(C, "lift").toarray()
    assert L[0, 1] == pytest.approx(0.5)
    assert L[0, 0] == pytest.approx(0.5)
    assert (sar_similarity(C, "count").toarray() == C.toarray()).all()


def test_similarity_zero_denominator():
    S = sar_similarity(np.zeros((2, 2)), "lift").toarray()
    assert (S == 0).all()


def test_affinity_no_decay_counts():
    data = records([("u", "i", 4.0, t) for t in (1, 2, 3)])
    assert sar_affinity(data).toarray()[0, 0] == 3.0
    assert sar_affinity(data, rating_as_weight=True).toarray()[0, 0] == 12.0


def test_affinity_decay():
    half = 3600.0
    one = records([("u", "i", 1.0, 1000)])
    a = sar_affinity(one, half, reference_time=1000 + 3600).toarray()[0, 0]
    assert abs(a - 0.5) <= 1e-12
    two = records([("u", "i", 1.0, 10_000), ("u", "i", 1.0, 10_000 - 7200)])
    a = sar_affinity(two, half, reference_time=10_000).toarray()[0, 0]
    assert abs(a - 1.25) <= 1e-12


def test_affinity_rejects_early_reference():
    with pytest.raises(InvalidReferenceTime):
        sar_affinity(records([("u", "i", 1.0, 50)]), 10.0, reference_time=40)


def test_sar_single_pair():
    model = SAR(similarity="count").fit(records([("u0", "i0", 1.0, 0)]))
    assert model.predict_one("u0", "i0") == 1.0


def test_sar_three_user_toy():
    data = records([("u0", "i0", 1.0, 0), ("u0", "i1", 1.0, 0), ("u1", "i0", 1.0, 0),
                    ("u1", "i2", 1.0, 0), ("u2", "i0", 1.0, 0)])
    model = SAR(similarity="count").fit(data)
    # C[0,1] = C[0,2] = 1, u2 only has i0
    assert model.predict([("u2", "i1"), ("u2", "i2")]).tolist() == [1.0, 1.0]
    recs = model.recommend("u2", 3, remove_seen=True)
    assert [i for i, _ in recs] == ["i1", "i2"]


def test_sar_cold_user_uses_popularity():
    data = random_set(np.random.default_rng(3))
    sar = SAR().fit(data)
    pop = Popularity().fit(data)
    assert ([i for i, _ in sar.recommend("nobody", 7)]
            == [i for i, _ in pop.recommend("nobody", 7)])


def test_sar_matches_triple_loop_oracle():
    rng = np.random.default_rng(77)
    for _ in range(25):
        data = random_set(rng, n_users=int(rng.integers(1, 11)), n_items=int(rng.integers(1, 11)),
                          n=int(rng.integers(1, 40)))
        model = SAR(similarity="count").fit(data)
        d = data.compact()
        events = list(zip(d.users.tolist(), d.items.tolist()))
        expected = oracles.sar_count_scores(events, d.n_users, d.n_items)
        pairs = [(d.user_ids[u], d.item_ids[i]) for u in range(d.n_users)
                 for i in range(d.n_items)]
        got = model.predict(pairs).reshape(d.n_users, d.n_items)
        assert got.tolist() == expected


# --- ALS --------------------------------------------------------------------


def test_ridge_solve_against_dense_solver():
    rng = np.random.default_rng(5)
    for _ in range(50):
        M = rng.normal(size=(int(rng.integers(1, 9)), 5))
        b = rng.normal(size=M.shape[0])
        reg = float(rng.uniform(1e-3, 2.0))
        got = ridge_solve((M.T @ M)[None], (M.T @ b)[None], reg)[0]
        # least squares on the augmented system [M; sqrt(reg) I] x = [b; 0]
        A = np.vstack([M, math.sqrt(reg) * np.eye(5)])
        want = scipy.linalg.lstsq(A, np.r_[b, np.zeros(5)])[0]
        np.testing.assert_allclose(got, want, rtol=0, atol=1e-9)


def test_als_objective_by_loop():
    rows, cols, vals = np.array([0, 0, 1]), np.array([0, 1, 1]), np.array([1.0, 2.0, 3.0])
    P = np.array([[0.5, 1.0], [2.0, -1.0]])
    Q = np.array([[1.0, 0.0], [0.5, 0.5]])
    expected = sum((v - P[r] @ Q[c]) ** 2 for r, c, v in zip(rows, cols, vals))
    expected += 0.1 * ((P ** 2).sum() + (Q ** 2).sum())
    assert als_objective(rows, cols, vals, P, Q, 0.1) == pytest.approx(expected, rel=1e-14)


def test_als_single_rating_stationary_point():
    r, lam = 3.7, 1e-9
    model = ALS(factors=1, regularization=lam).fit(records([("u", "i", r, 0)]))
    # any non-zero stationary point has p^2 = q^2 and p*q = r - lam
    assert model.predict_one("u", "i") == pytest.approx(r - lam, abs=1e-9)
    assert abs(model.predict_one("u", "i") - r) <= 1e-6


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(1e-3, 5.0))
def test_als_objective_non_increasing(seed, reg):
    data = random_set(np.random.default_rng(seed), n_users=8, n_items=12, n=50)
    model = ALS(factors=3, regularization=reg, iterations=5, seed=seed).fit(data)
    h = model.loss_history_
    assert len(h) == 11
    for before, after in zip(h, h[1:]):
        assert after <= before * (1 + 1e-8)


def test_als_cold_fallback_is_global_mean():
    data = records([("a", "x", 2.0, 0), ("b", "y", 4.0, 0), ("b", "y", 5.0, 1)])
    model = ALS(factors=2).fit(data)
    # duplicates merged keeping the latest: mean of 2 and 5
    assert model.global_mean_ == 3.5
    assert model.predict([("new", "x"), ("a", "new"), ("new", "new")]).tolist() == [3.5] * 3


def test_als_deterministic():
    data = random_set(np.random.default_rng(1))
    a = ALS(factors=4, seed=9).fit(data)
    b = ALS(factors=4, seed=9).fit(data)
    np.testing.assert_array_equal(a.user_factors_, b.user_factors_)
    assert a.recommend("u1", 5) == b.recommend("u1", 5)


@pytest.mark.parametrize("params", [
    {"factors": 0}, {"regularization": 0.0}, {"iterations": 0}, {"init_sigma": -1.0},
    {"factors": 2.5},
])
def test_als_param_validation(params):
    with pytest.raises((ValueError, TypeError)):
        ALS(**params).fit(random_set(np.random.default_rng(0)))


# --- SGD-MF -----------------------------------------------------------------


def sgd_oracle(ratings, users, items, P, Q, lr, reg, epochs, orders):
    mu = sum(ratings) / len(ratings)
    P, Q = P.copy(), Q.copy()
    bu = [0.0] * P.shape[0]
    bi = [0.0] * Q.shape[0]
    for epoch in range(epochs):
        for idx in orders[epoch]:
            u, i = users[idx], items[idx]
            pred = mu + bu[u] + bi[i] + sum(P[u, f] * Q[i, f] for f in range(P.shape[1]))
            e = ratings[idx] - pred
            bu[u] += lr * (e - reg * bu[u])
            bi[i] += lr * (e - reg * bi[i])
            for f in range(P.shape[1]):
                pf, qf = P[u, f], Q[i, f]
                P[u, f] += lr * (e * qf - reg * pf)
                Q[i, f] += lr * (e * pf - reg * qf)
    return mu, bu, bi, P, Q


def test_sgd_single_interaction_converges():
    r = 4.0
    data = records([("u", "i", r, 0)])
    init = SGDMF(factors=1, learning_rate=0.0, epochs=1, seed=3).fit(data)
    model = SGDMF(factors=1, learning_rate=0.1, regularization=0.0, epochs=200, seed=3).fit(data)
    mu, bu, bi, P, Q = sgd_oracle([r], [0], [0], init.user_factors_, init.item_factors_,
                                  0.1, 0.0, 200, [[0]] * 200)
    oracle_pred = mu + bu[0] + bi[0] + P[0, 0] * Q[0, 0]
    assert model.predict_one("u", "i") == pytest.approx(oracle_pred, abs=1e-12)
    assert abs(oracle_pred - r) <= 1e-3


def test_sgd_matches_scalar_recurrence():
    data = records([("a", "x", 5.0, 0), ("a", "y", 1.0, 0), ("b", "x", 3.0, 0),
                    ("c", "z", 2.0, 0)])
    init = SGDMF(factors=2, learning_rate=0.0, epochs=1, seed=11).fit(data)
    model = SGDMF(factors=2, learning_rate=0.05, regularization=0.01, epochs=30, seed=11)
    model.fit(data)
    from recokit._rng import derive_rng
    orders = [derive_rng(11, "sgd_mf", "epoch", e).permutation(4).tolist() for e in range(30)]
    d = data.compact()
    mu, bu, bi, P, Q = sgd_oracle(d.ratings.tolist(), d.users.tolist(), d.items.tolist(),
                                  init.user_factors_, init.item_factors_, 0.05, 0.01, 30, orders)
    np.testing.assert_allclose(model.user_factors_, P, atol=1e-12)
    np.testing.assert_allclose(model.item_bias_, bi, atol=1e-12)


def test_sgd_zero_learning_rate_keeps_init():
    data = random_set(np.random.default_rng(2))
    model = SGDMF(factors=2, learning_rate=0.0, epochs=1, seed=4).fit(data)
    assert not model.user_bias_.any() and not model.item_bias_.any()
    u, i = model.user_ids_[0], model.item_ids_[0]
    expected = model.global_mean_ + model.user_factors_[0] @ model.item_factors_[0]
    assert model.predict_one(u, i) == pytest.approx(expected, abs=1e-15)


def test_sgd_cold_pair_predicts_mean():
    model = SGDMF(factors=2).fit(random_set(np.random.default_rng(2)))
    assert model.predict_one("ghost", "phantom") == model.global_mean_


def test_sgd_divergence_reported():
    data = random_set(np.random.default_rng(6), n=100)
    with pytest.raises(Divergence) as err:
        SGDMF(factors=5, learning_rate=50.0, epochs=50).fit(data)
    assert err.value.epoch >= 1


def test_sgd_dense_planted_training_rmse():
    rng = np.random.default_rng(12)
    P, Q = rng.normal(size=(20, 2)), rng.normal(size=(20, 2))
    R = P @ Q.T
    data = records((f"u{u}", f"i{i}", float(R[u, i]), 0) for u in range(20) for i in range(20))
    model = SGDMF(factors=2, learning_rate=0.02, regularization=0.0, epochs=1000,
                  seed=1).fit(data)
    pred = model.predict(data)
    assert math.sqrt(np.mean((pred - data.ratings) ** 2)) < 0.05


# --- shared contract --------------------------------------------------------


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: repr(m))
def test_recommend_contract(model):
    rng = np.random.default_rng(99)
    for _ in range(5):
        data = random_set(rng, n_users=8, n_items=15, n=40)
        fitted = clone(model).fit(data)
        for user in list(fitted.user_ids_) + ["cold-user"]:
            for remove_seen in (True, False):
                recs = fitted.recommend(user, 6, remove_seen)
                assert len(recs) <= 6
                items = [i for i, _ in recs]
                assert len(set(items)) == len(items)
                idx = [fitted.item_index_[i] for i in items]
                for (i1, s1), (i2, s2), a, b in zip(recs, recs[1:], idx, idx[1:]):
                    assert s1 > s2 or (s1 == s2 and a < b)
                if remove_seen and user in fitted.user_index_:
                    seen = {r.item for r in data if r.user == user}
                    assert not seen & set(items)


@pytest.mark.parametrize("model", ALL_MODELS, ids=lambda m: repr(m))
def test_round_trip_serialization(model, tmp_path):
    rng = np.random.default_rng(1234)
    data = random_set(rng, n_users=10, n_items=20, n=80)
    fitted = clone(model).fit(data)
    path = tmp_path / "model.bin"
    save_model(fitted, path)
    loaded = load_model(path)
    assert type(loaded) is type(fitted)
    assert loaded.get_params() == fitted.get_params()
    users = list(fitted.user_ids_) + ["cold"]
    items = list(fitted.item_ids_) + ["cold"]
    pairs = [(users[rng.integers(len(users))], items[rng.integers(len(items))])
             for _ in range(1000)]
    assert predict_batch(loaded, pairs) == predict_batch(fitted, pairs)
    for u in users:
        assert loaded.recommend(u, 5) == fitted.recommend(u, 5)


def test_predict_batch_contract():
    model = ALS(factors=2).fit(random_set(np.random.default_rng(0)))
    assert predict_batch(model, []) == []
    u, i = model.user_ids_[0], model.item_ids_[0]
    assert predict_batch(model, [(u, i)]) == [model.predict_one(u, i)]
    rng = np.random.default_rng(1)
    pairs = [(f"u{rng.integers(12)}", f"i{rng.integers(22)}") for _ in range(1000)]
    assert predict_batch(model, pairs) == [model.predict_one(a, b) for a, b in pairs]


def test_sklearn_params_roundtrip():
    model = make_model("sgd_mf", factors=7)
    assert model.get_params()["factors"] == 7
    model.set_params(epochs=3)
    assert clone(model).epochs == 3


def test_unfitted_model_raises():
    with pytest.raises(NotFittedError):
        ALS().predict([("a", "b")])
