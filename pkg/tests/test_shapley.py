import numpy as np
import pytest

from hydrochar.cart import TreeParams, fit_tree
from hydrochar.errors import (
    DimensionMismatch,
    EmptyBackground,
    EmptyInput,
    TooManyFeatures,
)
from hydrochar.shapley import (
    ShapExplanation,
    emit_plot_data,
    explain,
    global_importance,
    importance_svg,
)


def mc_shapley(predict_fn, x, background, n_perm, seed):
    """Permutation-sampling Shapley oracle; returns (phi, standard errors)."""
    d = len(x)
    rng = np.random.default_rng(seed)
    perms = np.array([rng.permutation(d) for _ in range(n_perm)])
    onehot = perms[:, :, None] == np.arange(d)[None, None, :]
    prefix = np.cumsum(onehot, axis=1) > 0  # (n_perm, d, d) coalition masks
    bg = np.atleast_2d(background)
    rows = np.where(prefix[:, :, None, :], x[None, None, None, :], bg[None, None, :, :])
    values = np.asarray(predict_fn(rows.reshape(-1, d))).reshape(n_perm, d, len(bg)).mean(axis=2)
    base = float(np.asarray(predict_fn(bg)).mean())
    marginals = np.diff(np.concatenate([np.full((n_perm, 1), base), values], axis=1), axis=1)
    phi = np.zeros(d)
    se = np.zeros(d)
    for i in range(d):
        contrib = marginals[perms == i].reshape(n_perm)
        phi[i] = contrib.mean()
        se[i] = contrib.std(ddof=1) / np.sqrt(n_perm)
    return phi, se


def test_linear_model_with_zero_mean_background():
    f = lambda X: X[:, 0] + X[:, 1]  # noqa: E731
    bg = np.array([[1.0, -1.0], [-1.0, 1.0], [2.0, -2.0], [-2.0, 2.0]])
    e = explain(f, np.array([3.0, 5.0]), bg)
    assert e.phi == pytest.approx([3.0, 5.0], abs=1e-12)
    assert e.base_value == pytest.approx(0.0, abs=1e-12)
    assert e.prediction == pytest.approx(8.0, abs=1e-12)


def test_constant_model():
    f = lambda X: np.full(len(X), 4.25)  # noqa: E731
    e = explain(f, np.zeros(3), np.ones((5, 3)))
    assert np.all(e.phi == 0.0)
    assert e.base_value == 4.25


def test_dummy_feature_gets_exact_zero(rng):
    # step function of features 0 and 2 only; each split's true gain
    # dominates any spurious one, so features 1 and 3 stay unused
    x = rng.uniform(0, 1, (80, 4))
    y = np.where(x[:, 0] <= 0.5, 0.0, 4.0) + np.where(x[:, 2] <= 0.5, 0.0, 1.0)
    tree = fit_tree(x, y, TreeParams())
    used = set(tree.feature[~tree.is_leaf].tolist())
    assert used <= {0, 2}
    e = explain(tree.predict_batch, x[3], x[:20])
    assert e.phi[1] == 0.0
    assert e.phi[3] == 0.0


def test_efficiency_on_tree_models(rng):
    x = rng.uniform(0, 1, (60, 5))
    y = np.sin(3 * x[:, 0]) + x[:, 1] * x[:, 2]
    tree = fit_tree(x, y, TreeParams(max_depth=6))
    for row in x[:10]:
        e = explain(tree.predict_batch, row, x[:16])
        assert abs(e.base_value + e.phi.sum() - tree.predict(row)) <= 1e-9


def test_symmetry(rng):
    f = lambda X: X[:, 0] * X[:, 1] + X[:, 2]  # noqa: E731, symmetric in 0/1
    bg = rng.uniform(-1, 1, (12, 3))
    bg[:, 1] = bg[:, 0]  # background symmetric under swapping 0 and 1
    x = np.array([0.7, -0.4, 0.2])
    swapped = np.array([-0.4, 0.7, 0.2])
    e1 = explain(f, x, bg)
    e2 = explain(f, swapped, bg)
    assert e1.phi[0] == pytest.approx(e2.phi[1], abs=1e-12)
    assert e1.phi[1] == pytest.approx(e2.phi[0], abs=1e-12)
    assert e1.phi[2] == pytest.approx(e2.phi[2], abs=1e-12)


def test_linearity_of_explanations(rng):
    x = rng.uniform(0, 1, (50, 4))
    y1 = x[:, 0] ** 2 + x[:, 1]
    y2 = np.cos(2 * x[:, 2]) - x[:, 3]
    t1 = fit_tree(x, y1, TreeParams(max_depth=4))
    t2 = fit_tree(x, y2, TreeParams(max_depth=4))
    both = lambda X: t1.predict_batch(X) + t2.predict_batch(X)  # noqa: E731
    bg = x[:12]
    for row in x[:5]:
        ea = explain(t1.predict_batch, row, bg)
        eb = explain(t2.predict_batch, row, bg)
        es = explain(both, row, bg)
        assert np.abs((ea.phi + eb.phi) - es.phi).max() <= 1e-9
        assert es.base_value == pytest.approx(ea.base_value + eb.base_value, abs=1e-9)


def test_monte_carlo_oracle_agreement(rng):
    x = rng.uniform(0, 1, (40, 4))
    y = 3 * x[:, 0] + np.sin(4 * x[:, 1]) + x[:, 2] * x[:, 3]
    tree = fit_tree(x, y, TreeParams(max_depth=5))
    bg = x[:8]
    row = x[11]
    exact = explain(tree.predict_batch, row, bg)
    phi_mc, se = mc_shapley(tree.predict_batch, row, bg, n_perm=10_000, seed=99)
    for i in range(4):
        assert abs(exact.phi[i] - phi_mc[i]) <= 3.0 * max(se[i], 1e-12)


def test_errors():
    f = lambda X: X.sum(axis=1)  # noqa: E731
    with pytest.raises(TooManyFeatures):
        explain(f, np.zeros(21), np.zeros((2, 21)))
    with pytest.raises(EmptyBackground):
        explain(f, np.zeros(3), np.zeros((0, 3)))
    with pytest.raises(DimensionMismatch):
        explain(f, np.zeros(3), np.zeros((4, 2)))
    with pytest.raises(EmptyInput):
        global_importance(f, np.zeros((0, 3)), np.zeros((2, 3)))
    with pytest.raises(EmptyInput):
        emit_plot_data([])


def test_global_importance_ranking(rng):
    x = rng.uniform(0, 1, (60, 3))
    y = np.where(x[:, 0] <= 0.4, 0.0, np.where(x[:, 0] <= 0.7, 5.0, 9.0))
    tree = fit_tree(x, y, TreeParams())
    assert set(tree.feature[~tree.is_leaf].tolist()) == {0}
    gi = global_importance(tree.predict_batch, x[:12], x[:16])
    assert gi.ranking[0] == 0
    assert gi.mean_abs_phi[1] == 0.0 and gi.mean_abs_phi[2] == 0.0
    # zero-importance features rank by index after the used one
    assert gi.ranking.tolist() == [0, 1, 2]


def test_global_importance_single_row_equals_abs_phi(rng):
    f = lambda X: X[:, 0] - 2 * X[:, 1]  # noqa: E731
    bg = rng.uniform(-1, 1, (10, 2))
    row = np.array([0.5, 0.25])
    gi = global_importance(f, row[None, :], bg)
    e = explain(f, row, bg)
    assert np.allclose(gi.mean_abs_phi, np.abs(e.phi), atol=1e-12)


def test_plot_data_tables(tmp_path):
    e1 = ShapExplanation(np.array([1.0, 2.0]), np.array([0.5, -1.0]), 3.0)
    e2 = ShapExplanation(np.array([0.0, 1.0]), np.array([-0.5, 1.0]), 3.0)
    plot = emit_plot_data([e1, e2], feature_names=["a", "b"], out_dir=tmp_path)
    # bar is the mean of |phi|, not the signed mean (which would be zero)
    assert dict(plot.bar) == {"a": 0.5, "b": 1.0}
    assert plot.bar[0][0] == "b"
    assert len(plot.beeswarm) == 4
    assert plot.heatmap.shape == (2, 2)
    assert plot.fx == pytest.approx([2.5, 3.5])
    for name in ("beeswarm.csv", "bar.csv", "heatmap.csv", "importance.svg"):
        assert (tmp_path / name).exists()
    bar_lines = (tmp_path / "bar.csv").read_text().splitlines()
    assert bar_lines[0] == "feature,mean_abs_phi"
    assert len(bar_lines) == 3


def test_plot_single_explanation_bar_is_abs_phi():
    e = ShapExplanation(np.array([1.0, 2.0, 3.0]), np.array([0.25, -0.75, 0.0]), 1.0)
    plot = emit_plot_data([e])
    assert dict(plot.bar) == {"x0": 0.25, "x1": 0.75, "x2": 0.0}


def test_svg_deterministic():
    e = ShapExplanation(np.array([1.0, 2.0]), np.array([0.5, -1.0]), 3.0)
    plot = emit_plot_data([e], feature_names=["alpha", "beta"])
    svg1 = importance_svg(plot)
    svg2 = importance_svg(plot)
    assert svg1 == svg2
    assert 'viewBox="0 0 800 400"' in svg1
    assert svg1.count("<rect") == 2


def test_inconsistent_feature_counts_rejected():
    e1 = ShapExplanation(np.array([1.0, 2.0]), np.array([0.5, -1.0]), 3.0)
    e2 = ShapExplanation(np.array([1.0]), np.array([0.5]), 3.0)
    with pytest.raises(DimensionMismatch):
        emit_plot_data([e1, e2])
