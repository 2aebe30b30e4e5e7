import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from optadvisor.errors import LearnerError
from optadvisor.learners import Dataset, coefficient_confinement_holds, m5_build, m5_predict, population_sd, sdr
from optadvisor.learners.m5 import LinearModel, M5Model, Node
from optadvisor.profile_ingest import FeatureSchema, FeatureVector


def _ds(X, y, names=("f1", "f2")):
    return Dataset.from_arrays(list(names), np.asarray(X, dtype=float), np.asarray(y, dtype=float))


def _linear_data(n, seed):
    X = np.random.default_rng(seed).uniform(0, 1, (n, 2))
    return X, 1 + 0.5 * X[:, 0] - 0.3 * X[:, 1]


def test_sdr_hand_computed():
    # population sd of {1,1,5,5} is 2.0; the perfect split leaves zero spread
    assert population_sd(np.array([1, 1, 5, 5.0])) == 2.0
    assert sdr(np.array([1, 1, 5, 5.0]), [np.array([1, 1.0]), np.array([5, 5.0])]) == 2.0


def test_tree_picks_the_perfect_split():
    model = m5_build(_ds([[0], [1], [2], [3]], [1, 1, 5, 5], names=("f1",)), prune=False)
    assert model.root.feature == "f1"
    assert model.root.threshold == 1.5
    assert model.root.left.is_leaf and model.root.right.is_leaf


def test_constant_labels_collapse():
    X, _ = _linear_data(50, 0)
    model = m5_build(_ds(X, np.full(50, 1.7)))
    assert model.root.is_leaf
    assert model.root.model.coefficients == {}
    assert model.predict_array(np.random.default_rng(1).uniform(-5, 5, (20, 2))).tolist() == [1.7] * 20


def test_linear_target_recovered():
    X, y = _linear_data(200, 42)
    model = m5_build(_ds(X, y))
    Xt, yt = _linear_data(100, 43)
    rmse = float(np.sqrt(np.mean((model.predict_array(Xt) - yt) ** 2)))
    assert rmse < 0.01
    assert coefficient_confinement_holds(model)


def test_boundary_routes_left():
    schema = FeatureSchema(("f1",))
    root = Node(LinearModel(0.0, {}), n=10, allowed=("f1",), feature="f1", threshold=0.5,
                left=Node(LinearModel(1.0, {}), n=5), right=Node(LinearModel(2.0, {}), n=5))
    model = M5Model(schema, root, smoothing_k=0.0)
    assert m5_predict(model, FeatureVector(schema, (0.5,))) == 1.0
    assert m5_predict(model, FeatureVector(schema, (0.5000001,))) == 2.0


@pytest.mark.parametrize("x, expected", [(0.25, 33 / 14), (0.5, 18 / 7), (1.0, 29 / 7)])
def test_smoothing_recurrence_by_hand(x, expected):
    # root n=20 with q(x) = 1 + 2x; leaves are constants 3 (left) and 5 (right); k = 15
    # p' = (20 p + 15 q) / 35: x=0.25 -> (60 + 22.5)/35, x=0.5 -> (60 + 30)/35, x=1 -> (100 + 45)/35
    schema = FeatureSchema(("x",))
    root = Node(LinearModel(1.0, {"x": 2.0}), n=20, allowed=("x",), feature="x", threshold=0.5,
                left=Node(LinearModel(3.0, {}), n=8), right=Node(LinearModel(5.0, {}), n=12))
    model = M5Model(schema, root)
    assert model.smoothing_k == 15.0
    assert m5_predict(model, FeatureVector(schema, (x,))) == pytest.approx(expected, rel=1e-15)


def test_feature_name_tie_prefers_smaller_name():
    x = np.array([0, 1, 2, 3, 4, 5, 6, 7.0])
    X = np.column_stack([x, x])
    model = m5_build(_ds(X, [1, 1, 1, 1, 4, 4, 4, 4], names=("zeta", "alpha")), prune=False)
    assert model.root.feature == "alpha"


def test_errors():
    with pytest.raises(LearnerError):
        m5_build(Dataset(FeatureSchema(("a",)), ()))


def test_unpruned_models_use_only_subtree_splits():
    rng = np.random.default_rng(7)
    X = rng.uniform(size=(120, 4))
    y = np.where(X[:, 0] > 0.5, 2 + X[:, 1], 1 + X[:, 2] ** 2) + 0.01 * rng.normal(size=120)
    model = m5_build(_ds(X, y, names=("a", "b", "c", "d")), prune=False)
    for node in model.root.walk():
        used = {f for f, c in node.model.coefficients.items() if c != 0.0}
        assert used <= node.split_features()
        if node.is_leaf:
            assert used == set()
    assert coefficient_confinement_holds(m5_build(_ds(X, y, names=("a", "b", "c", "d"))))


def test_pruning_shrinks_tree():
    rng = np.random.default_rng(3)
    X = rng.uniform(size=(150, 2))
    y = 1 + 0.5 * X[:, 0] + 0.05 * rng.normal(size=150)
    data = _ds(X, y)
    assert m5_build(data).n_leaves() < m5_build(data, prune=False).n_leaves()


@settings(max_examples=200)
@given(st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=2, max_size=40), st.data())
def test_sdr_never_negative(labels, data):
    y = np.array(labels)
    mask = np.array(data.draw(st.lists(st.booleans(), min_size=len(y), max_size=len(y))))
    if mask.all() or not mask.any():
        return
    assert sdr(y, [y[mask], y[~mask]]) >= -1e-12


@pytest.mark.parametrize("seed", range(5))
@pytest.mark.parametrize("c", [0.5, 3.0, 10.0])
def test_label_shift(seed, c):
    rng = np.random.default_rng(seed)
    X = rng.uniform(size=(80, 3))
    y = 1 + np.sin(3 * X[:, 0]) + X[:, 1] * X[:, 2]
    a = m5_build(_ds(X, y, names=("a", "b", "c")))
    b = m5_build(_ds(X, y + c, names=("a", "b", "c")))
    Q = rng.uniform(size=(30, 3))
    np.testing.assert_allclose(b.predict_array(Q), a.predict_array(Q) + c, rtol=0, atol=1e-9)


def test_deterministic_build():
    X, y = _linear_data(60, 9)
    y = y + np.random.default_rng(9).normal(scale=0.1, size=60)
    a, b = m5_build(_ds(X, y)), m5_build(_ds(X, y))
    Q = np.random.default_rng(10).uniform(size=(20, 2))
    assert np.array_equal(a.predict_array(Q), b.predict_array(Q))
