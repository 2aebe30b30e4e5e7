import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optadvisor.errors import LearnerError, SchemaError
from optadvisor.learners import DEFAULT_K, Dataset, knn_predict, knn_train
from optadvisor.profile_ingest import FeatureSchema, FeatureVector

from conftest import knn_oracle


def _ds(X, y, names=None):
    X = np.asarray(X, dtype=float)
    names = names or [f"f{j}" for j in range(X.shape[1])]
    return Dataset.from_arrays(names, X, y)


def _q(data, row):
    return FeatureVector(data.schema, tuple(row))


def test_stores_every_instance():
    rng = np.random.default_rng(0)
    data = _ds(rng.uniform(size=(10, 3)), rng.uniform(0.5, 2, 10))
    model = knn_train(data, k=10)
    assert len(model.y) == 10
    assert model.k == DEFAULT_K == 10


def test_exact_recall_k1():
    rng = np.random.default_rng(1)
    X, y = rng.uniform(size=(20, 4)), rng.uniform(0.5, 2, 20)
    data = _ds(X, y)
    model = knn_train(data, k=1)
    for row, label in zip(X, y):
        assert knn_predict(model, _q(data, row)) == label


def test_k_at_least_n_gives_mean():
    data = _ds([[0.0], [1.0], [5.0]], [1.0, 2.0, 4.5])
    model = knn_train(data, k=7)
    assert knn_predict(model, _q(data, [100.0])) == pytest.approx(2.5, abs=1e-15)


def test_constant_feature_ignored():
    # f1 is constant in training; a wild query value on it must not change anything
    data = _ds([[0.0, 3.0], [1.0, 3.0], [2.0, 3.0]], [1.0, 2.0, 3.0])
    model = knn_train(data, k=1)
    assert model.mins[1] == model.maxs[1] == 3.0
    assert knn_predict(model, _q(data, [1.9, 3.0])) == knn_predict(model, _q(data, [1.9, -1e6])) == 3.0


def test_unclamped_extrapolation():
    data = _ds([[0.0], [1.0]], [1.0, 2.0])
    model = knn_train(data, k=1)
    assert knn_predict(model, _q(data, [7.0])) == 2.0


def test_tie_prefers_lower_stored_index():
    # both neighbours at distance 0.5; canonical order stores x=0 first
    data = _ds([[1.0], [0.0]], [9.0, 3.0])
    model = knn_train(data, k=1)
    assert knn_predict(model, _q(data, [0.5])) == 3.0


def test_errors():
    data = _ds([[0.0]], [1.0])
    with pytest.raises(LearnerError):
        knn_train(data, k=0)
    with pytest.raises(LearnerError):
        knn_train(Dataset(FeatureSchema(("a",)), ()), k=1)
    model = knn_train(data, k=1)
    with pytest.raises(SchemaError):
        knn_predict(model, FeatureVector(FeatureSchema(("b",)), (0.0,)))


@pytest.mark.parametrize("seed", range(20))
def test_matches_brute_force_oracle(seed):
    rng = np.random.default_rng(seed)
    n, d = int(rng.integers(1, 51)), int(rng.integers(1, 9))
    X, y = rng.normal(size=(n, d)) * rng.uniform(0.01, 100, d), rng.uniform(0.3, 3, n)
    data = _ds(X, y)
    for k in (1, 3, 10):
        model = knn_train(data, k)
        for q in rng.normal(size=(5, d)) * 2:
            assert abs(knn_predict(model, _q(data, q)) - knn_oracle(X.tolist(), y.tolist(), q.tolist(), k)) < 1e-9


_small_sets = st.lists(
    st.tuples(st.lists(st.integers(0, 3), min_size=2, max_size=2), st.integers(1, 9)),
    min_size=1, max_size=12,
)


@settings(max_examples=80)
@given(_small_sets, st.randoms(use_true_random=False), st.integers(1, 5))
def test_permutation_invariance_with_ties(rows, rnd, k):
    # integer features on a tiny grid force distance ties
    X = [r[0] for r in rows]
    y = [float(r[1]) for r in rows]
    perm = list(range(len(rows)))
    rnd.shuffle(perm)
    a = knn_train(_ds(X, y), k)
    b = knn_train(_ds([X[i] for i in perm], [y[i] for i in perm]), k)
    grid = np.array([[i / 2, j / 2] for i in range(8) for j in range(8)])
    assert np.array_equal(a.predict_array(grid), b.predict_array(grid))


@settings(max_examples=40)
@given(st.integers(0, 10**6), st.floats(0.1, 50))
def test_label_shift(seed, c):
    rng = np.random.default_rng(seed)
    X, y = rng.uniform(size=(15, 3)), rng.uniform(0.5, 2, 15)
    a = knn_train(_ds(X, y), 4)
    b = knn_train(_ds(X, y + c), 4)
    Q = rng.uniform(size=(10, 3))
    np.testing.assert_allclose(b.predict_array(Q), a.predict_array(Q) + c, rtol=0, atol=1e-9)
