import numpy as np
import pytest

from oscar.attenuation import (
    EPS,
    bilinear_resize,
    build_mask,
    default_grid,
    grid_search_alpha_beta,
    group_metrics,
    make_folds,
    weighted_pool_and_classify,
)
from oscar.errors import BadShape, EmptyGrid, EmptyGroup, ShapeMismatch
from oscar.interchange import FeatureBundle


def _bundle(feats, weights=None, bias=None):
    feats = np.asarray(feats, dtype=float)
    c = feats.shape[1]
    if weights is None:
        weights = np.eye(2, c)
    if bias is None:
        bias = np.zeros(2)
    ids = [f"i{k}" for k in range(feats.shape[0])]
    return FeatureBundle(
        features=feats, weights=np.asarray(weights, float), bias=np.asarray(bias, float), image_ids=ids
    )


def test_worked_mask_example():
    # W = [-1, 0.5], alpha = beta = 1 -> W~ ~ [-1, 0.5], A ~ [2, 0.5]
    mask = build_mask(np.array([[-1.0, 0.5]]), (1, 2), 1.0, 1.0)
    np.testing.assert_allclose(mask.weights, [[2.0, 0.5]], atol=1e-7)


def test_identity_mask_is_exactly_one():
    mask = build_mask(np.array([[-1.0, 0.5]]), (1, 2), 0.0, 0.0)
    np.testing.assert_array_equal(mask.weights, [[1.0, 1.0]])


def test_pooling_hand_example():
    # F = [[1,3],[5,7]], A = identity pattern -> z = (1 + 7) / (2 + eps)
    feats = np.array([[[[1.0, 3.0], [5.0, 7.0]]]])
    from oscar.attenuation import AttenuationMask

    bundle = _bundle(feats, weights=[[1.0], [2.0]], bias=[0.0, 0.0])
    mask = AttenuationMask(
        alpha=0.0, beta=0.0, weights=np.array([[1.0, 0.0], [0.0, 1.0]])
    )
    logits = weighted_pool_and_classify(bundle, mask)
    z = (1.0 + 7.0) / (2.0 + EPS)
    np.testing.assert_allclose(logits, [[z, 2 * z]], rtol=1e-12)
    assert z == pytest.approx(4.0, abs=1e-6)


def test_uniform_mask_matches_mean_pooling():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(5, 3, 4, 4))
    bundle = _bundle(feats, weights=rng.normal(size=(2, 3)), bias=rng.normal(size=2))
    mask = build_mask(rng.normal(size=(4, 4)), (4, 4), 0.0, 0.0)
    got = weighted_pool_and_classify(bundle, mask)
    expected = feats.mean(axis=(2, 3)) @ bundle.weights.T + bundle.bias
    np.testing.assert_allclose(got, expected, rtol=1e-6)


def test_bilinear_resize_constant_and_endpoints():
    grid = np.full((3, 3), 2.5)
    np.testing.assert_allclose(bilinear_resize(grid, (7, 5)), 2.5, atol=1e-12)
    up = bilinear_resize(np.array([[0.0, 1.0]]), (1, 4))
    assert up[0, 0] == 0.0 and up[0, -1] == 1.0
    assert np.all(np.diff(up[0]) >= 0)


def test_build_mask_resizes_spatial_input():
    mask = build_mask(np.array([[-1.0, 1.0]]), (2, 4), 1.0, 1.0)
    assert mask.weights.shape == (2, 4)
    assert mask.weights.max() <= 2.0 + 1e-9
    assert mask.weights.min() >= 0.0 - 1e-9


def test_build_mask_validation():
    with pytest.raises(BadShape):
        build_mask(np.zeros((2, 2)), (2, 2), -0.1, 0.0)
    with pytest.raises(BadShape):
        build_mask(np.zeros(4), (2, 2), 0.0, 0.0)
    with pytest.raises(BadShape):
        build_mask(np.array([[np.inf, 0.0]]), (1, 2), 0.0, 0.0)


def test_pool_shape_mismatch():
    bundle = _bundle(np.zeros((2, 2, 3, 3)))
    mask = build_mask(np.zeros((2, 2)), (2, 2), 0.0, 0.0)
    with pytest.raises(ShapeMismatch):
        weighted_pool_and_classify(bundle, mask)


def test_group_metrics_hand_case():
    y = np.array([0, 0, 1, 1])
    a = np.array([0, 1, 0, 1])
    preds = np.array([0, 1, 1, 1])  # wrong only on group (0, 1)
    m = group_metrics(preds, y, a)
    assert m.group_accuracies[(0, 1)] == 0.0
    assert m.worst_group_accuracy == 0.0
    assert m.balanced_accuracy == pytest.approx(0.75)


def test_group_metrics_empty_group():
    with pytest.raises(EmptyGroup):
        group_metrics(np.zeros(2, int), np.array([0, 0]), np.array([0, 0]))


def test_make_folds_balanced():
    y = np.array([i % 2 for i in range(32)])
    a = np.array([(i // 2) % 2 for i in range(32)])
    folds = make_folds(y, a, 4)
    assert sorted(np.concatenate(folds)) == list(range(32))
    for fold in folds:
        for gy in (0, 1):
            for ga in (0, 1):
                assert ((y[fold] == gy) & (a[fold] == ga)).sum() == 2


def _shortcut_benchmark(seed=0, m=64):
    """One feature cell drives minority-group errors; the contribution map
    marks it positive, so attenuating it should fix the worst group."""
    rng = np.random.default_rng(seed)
    y = np.array([(i >> 1) & 1 for i in range(m)])
    a = np.array([i & 1 for i in range(m)])
    feats = np.zeros((m, 2, 4, 4))
    feats[:, 0, 2, 2] = 2.0 * y - 1.0  # task cell
    feats[:, 1, 0, 0] = (2.0 * a - 1.0) * 3.0  # shortcut cell, stronger
    feats += rng.normal(0, 0.01, feats.shape)
    weights = np.array([[-1.0, -1.0], [1.0, 1.0]]) * 16.0
    bundle = _bundle(feats, weights=weights)
    spatial = np.zeros((4, 4))
    spatial[0, 0] = 1.0  # shortcut-aligned
    spatial[2, 2] = -1.0  # task-aligned
    return bundle, spatial, y, a


def test_grid_search_improves_worst_group():
    bundle, spatial, y, a = _shortcut_benchmark()
    grid = [(al, be) for al in (0.0, 0.5, 1.0) for be in (0.0, 0.5, 1.0)]
    report = grid_search_alpha_beta(bundle, spatial, y, a, grid)
    assert (
        report.attenuated_test.worst_group_accuracy
        > report.baseline_test.worst_group_accuracy
    )
    assert all(report.feasible)
    assert len(report.per_fold) == 4


def test_grid_search_empty_grid():
    bundle, spatial, y, a = _shortcut_benchmark()
    with pytest.raises(EmptyGrid):
        grid_search_alpha_beta(bundle, spatial, y, a, [])


def test_default_grid():
    grid = default_grid(stop=2.0, step=0.25)
    assert len(grid) == 81
    assert grid[0] == (0.0, 0.0)
    assert grid[-1] == (2.0, 2.0)
