import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydrochar.cart import RegressionTree, TreeParams, fit_tree, predict_tree
from hydrochar.errors import DimensionMismatch, EmptyInput
from hydrochar.stats import r_squared


def training_sse(tree, x, y):
    return float(np.sum((tree.predict_batch(x) - y) ** 2))


def test_params_validation():
    with pytest.raises(ValueError):
        TreeParams(min_samples_split=1)
    with pytest.raises(ValueError):
        TreeParams(min_samples_leaf=0)
    with pytest.raises(ValueError):
        TreeParams(min_impurity_decrease=-1.0)


def test_constant_target_single_leaf():
    tree = fit_tree([[0.0], [1.0], [2.0]], [4.0, 4.0, 4.0], TreeParams())
    assert tree.n_nodes == 1
    assert tree.predict([99.0]) == 4.0


def test_single_candidate_split():
    tree = fit_tree([[0.0], [1.0]], [0.0, 10.0], TreeParams(min_samples_leaf=1))
    assert tree.n_nodes == 3
    assert tree.threshold[0] == 0.5
    assert tree.predict([0.2]) == 0.0
    assert tree.predict([0.7]) == 10.0
    # boundary routes left (<= convention)
    assert predict_tree(tree, [0.5]) == 0.0


def test_memorization_with_distinct_rows(rng):
    x = rng.uniform(0, 1, (150, 4))
    y = rng.normal(0, 2, 150)
    tree = fit_tree(x, y, TreeParams())
    assert np.array_equal(tree.predict_batch(x), y)
    assert r_squared(y, tree.predict_batch(x)) == 1.0


def test_memorization_xor_pattern():
    x = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0], [1.0, 1.0]])
    y = np.array([0.0, 1.0, 1.0, 0.0])
    tree = fit_tree(x, y, TreeParams())
    assert np.array_equal(tree.predict_batch(x), y)


def test_deeper_never_hurts_training_sse(rng):
    x = rng.uniform(0, 1, (120, 3))
    y = np.sin(5 * x[:, 0]) + x[:, 1] ** 2 + rng.normal(0, 0.2, 120)
    last = np.inf
    for depth in range(1, 10):
        tree = fit_tree(x, y, TreeParams(max_depth=depth))
        sse = training_sse(tree, x, y)
        assert sse <= last + 1e-9
        last = sse


def test_max_depth_respected(rng):
    x = rng.uniform(0, 1, (200, 3))
    y = rng.normal(0, 1, 200)
    for depth in (0, 1, 3, 5):
        tree = fit_tree(x, y, TreeParams(max_depth=depth))
        assert tree.depth() <= depth


def test_min_samples_leaf_respected(rng):
    x = rng.uniform(0, 1, (100, 2))
    y = rng.normal(0, 1, 100)
    tree = fit_tree(x, y, TreeParams(min_samples_leaf=7))
    assert all(count >= 7 for _, count in tree.leaf_nodes())


def test_leaf_replay_reproduces_target_sum(rng):
    x = rng.uniform(0, 1, (80, 3))
    y = rng.normal(10, 3, 80)
    tree = fit_tree(x, y, TreeParams(max_depth=4, min_samples_leaf=3))
    replay = sum(v * c for v, c in tree.leaf_nodes())
    assert replay == pytest.approx(y.sum(), abs=1e-9)
    assert sum(c for _, c in tree.leaf_nodes()) == 80


def test_min_impurity_decrease_prunes():
    x = np.array([[0.0], [1.0], [2.0], [3.0]])
    y = np.array([0.0, 0.1, 0.0, 0.1])
    free = fit_tree(x, y, TreeParams())
    strict = fit_tree(x, y, TreeParams(min_impurity_decrease=10.0))
    assert free.n_nodes > 1
    assert strict.n_nodes == 1


def test_determinism_identical_structures(rng):
    x = rng.uniform(0, 1, (90, 5))
    y = rng.normal(0, 1, 90)
    a = fit_tree(x, y, TreeParams(max_depth=6))
    b = fit_tree(x, y, TreeParams(max_depth=6))
    assert a.to_json_obj() == b.to_json_obj()


def test_tie_break_prefers_lowest_feature():
    # duplicated feature column: both splits identical gain, feature 0 wins
    x = np.array([[0.0, 0.0], [1.0, 1.0], [2.0, 2.0], [3.0, 3.0]])
    y = np.array([0.0, 0.0, 5.0, 5.0])
    tree = fit_tree(x, y, TreeParams())
    assert tree.feature[0] == 0


def test_prediction_piecewise_constant(rng):
    x = rng.uniform(0, 1, (60, 3))
    y = rng.normal(0, 1, 60)
    tree = fit_tree(x, y, TreeParams(max_depth=5))
    thresholds = sorted(set(tree.threshold[~tree.is_leaf]))
    for _ in range(20):
        q = rng.uniform(0, 1, 3)
        base = tree.predict(q)
        for j in range(3):
            cuts = sorted({t for f, t in zip(tree.feature[~tree.is_leaf], tree.threshold[~tree.is_leaf]) if f == j})
            lo = max([c for c in cuts if c < q[j]], default=0.0)
            hi = min([c for c in cuts if c >= q[j]], default=1.0)
            if hi <= lo:
                continue
            q2 = q.copy()
            q2[j] = rng.uniform(lo + 1e-12, hi)
            assert tree.predict(q2) == base


def test_errors():
    with pytest.raises(EmptyInput):
        fit_tree(np.empty((0, 2)), [], TreeParams())
    with pytest.raises(DimensionMismatch):
        fit_tree([[1.0], [2.0]], [1.0], TreeParams())
    tree = fit_tree([[0.0], [1.0]], [0.0, 1.0], TreeParams())
    with pytest.raises(DimensionMismatch):
        tree.predict([1.0, 2.0])
    with pytest.raises(DimensionMismatch):
        tree.predict_batch(np.ones((3, 2)))


def test_serialization_roundtrip_bit_exact(rng):
    x = rng.uniform(-5, 5, (70, 4))
    y = rng.normal(0, 2, 70)
    tree = fit_tree(x, y, TreeParams(max_depth=7, min_samples_leaf=2))
    blob = json.dumps(tree.to_json_obj())
    back = RegressionTree.from_json_obj(json.loads(blob))
    q = rng.uniform(-5, 5, (40, 4))
    assert np.array_equal(tree.predict_batch(q), back.predict_batch(q))
    assert back.params == tree.params


def test_predict_batch_matches_scalar(rng):
    x = rng.uniform(0, 1, (50, 3))
    y = rng.normal(0, 1, 50)
    tree = fit_tree(x, y, TreeParams(max_depth=4))
    q = rng.uniform(0, 1, (25, 3))
    batch = tree.predict_batch(q)
    assert all(batch[i] == tree.predict(q[i]) for i in range(len(q)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_fully_grown_replays_training_targets(seed):
    r = np.random.default_rng(seed)
    x = r.uniform(0, 1, (30, 2))
    y = r.normal(0, 1, 30)
    tree = fit_tree(x, y, TreeParams())
    assert np.array_equal(tree.predict_batch(x), y)
