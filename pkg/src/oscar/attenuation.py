"""Test-time feature attenuation guided by a combined contribution map.

The spatial map is interpolated to feature resolution, normalised by its
maximum absolute value, turned into the weight A = 1 - W~ * S (S = alpha on
negative cells, beta elsewhere), and applied as weighted global pooling
before the exported linear head. No network is ever executed here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BadShape,
    EmptyGrid,
    EmptyGroup,
    ShapeMismatch,
)
from .interchange import FeatureBundle

EPS = 1e-8


@dataclass(frozen=True)
class AttenuationMask:
    alpha: float
    beta: float
    weights: np.ndarray  # A, shape H' x W'
    epsilon: float = EPS


@dataclass(frozen=True)
class GroupMetrics:
    group_accuracies: dict  # (y, a) -> accuracy
    balanced_accuracy: float
    worst_group_accuracy: float

    def to_dict(self) -> dict:
        return {
            "group_accuracies": {
                f"{y}{a}": v for (y, a), v in sorted(self.group_accuracies.items())
            },
            "balanced_accuracy": self.balanced_accuracy,
            "worst_group_accuracy": self.worst_group_accuracy,
        }


def bilinear_resize(grid: np.ndarray, out_shape: tuple[int, int]) -> np.ndarray:
    """Bilinear interpolation with half-pixel centre alignment."""
    grid = np.asarray(grid, dtype=np.float64)
    h, w = grid.shape
    oh, ow = out_shape
    ys = np.clip((np.arange(oh) + 0.5) * h / oh - 0.5, 0, h - 1)
    xs = np.clip((np.arange(ow) + 0.5) * w / ow - 0.5, 0, w - 1)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = grid[np.ix_(y0, x0)] * (1 - fx) + grid[np.ix_(y0, x1)] * fx
    bot = grid[np.ix_(y1, x0)] * (1 - fx) + grid[np.ix_(y1, x1)] * fx
    return top * (1 - fy[:, 0])[:, None] + bot * fy[:, 0][:, None]


def build_mask(
    rcs_star_spatial: np.ndarray,
    feature_shape: tuple[int, int],
    alpha: float,
    beta: float,
) -> AttenuationMask:
    """Spatial weight A = 1 - W~ * S at feature resolution.

    W~ is the map scaled by its maximum absolute value (+ epsilon); S is
    alpha where W~ < 0 and beta otherwise, so task-aligned cells are
    amplified and shortcut-aligned cells attenuated.
    """
    if alpha < 0 or beta < 0:
        raise BadShape("alpha and beta must be nonnegative")
    grid = np.asarray(rcs_star_spatial, dtype=np.float64)
    if grid.ndim != 2:
        raise BadShape("contribution map must be 2D")
    if not np.all(np.isfinite(grid)):
        raise BadShape("contribution map must be finite")
    if grid.shape != tuple(feature_shape):
        grid = bilinear_resize(grid, tuple(feature_shape))
    w_tilde = grid / (np.abs(grid).max() + EPS)
    scale = np.where(w_tilde < 0, alpha, beta)
    return AttenuationMask(
        alpha=float(alpha), beta=float(beta), weights=1.0 - w_tilde * scale
    )


def weighted_pool_and_classify(
    bundle: FeatureBundle, mask: AttenuationMask
) -> np.ndarray:
    """Weighted global pooling of B x C x H' x W' features, then the head."""
    feats = bundle.features
    if mask.weights.shape != feats.shape[2:]:
        raise ShapeMismatch(
            f"mask {mask.weights.shape} vs features {feats.shape[2:]}"
        )
    a = mask.weights
    pooled = (feats * a).sum(axis=(2, 3)) / (a.sum() + mask.epsilon)
    return pooled @ bundle.weights.T + bundle.bias


def group_metrics(
    predictions: np.ndarray, y: np.ndarray, a: np.ndarray
) -> GroupMetrics:
    """Per-(y, a) accuracies, balanced accuracy, worst-group accuracy."""
    predictions = np.asarray(predictions)
    y = np.asarray(y)
    a = np.asarray(a)
    correct = predictions == y
    accs = {}
    for gy in (0, 1):
        for ga in (0, 1):
            sel = (y == gy) & (a == ga)
            if not sel.any():
                raise EmptyGroup(f"group (y={gy}, a={ga}) has no samples")
            accs[(gy, ga)] = float(correct[sel].mean())
    recalls = [float(correct[y == gy].mean()) for gy in (0, 1)]
    return GroupMetrics(
        group_accuracies=accs,
        balanced_accuracy=float(np.mean(recalls)),
        worst_group_accuracy=min(accs.values()),
    )


def _classify(bundle, mask, sel=None):
    logits = weighted_pool_and_classify(bundle, mask)
    preds = logits.argmax(axis=1)
    return preds if sel is None else preds[sel]


def make_folds(y: np.ndarray, a: np.ndarray, n_folds: int = 4) -> list[np.ndarray]:
    """Disjoint folds assigned round-robin within each (y, a) group, so every
    fold keeps all four groups populated when sample counts allow."""
    fold_of = np.zeros(len(y), dtype=int)
    for gy in (0, 1):
        for ga in (0, 1):
            idx = np.nonzero((y == gy) & (a == ga))[0]
            fold_of[idx] = np.arange(len(idx)) % n_folds
    return [np.nonzero(fold_of == f)[0] for f in range(n_folds)]


@dataclass
class GridSearchReport:
    selected: list  # (alpha, beta) per evaluation fold
    feasible: list  # bool per evaluation fold
    baseline_test: GroupMetrics
    attenuated_test: GroupMetrics
    per_fold: list = field(default_factory=list)


def _average_metrics(metrics: list[GroupMetrics]) -> GroupMetrics:
    """Held-out metrics averaged over evaluation folds."""
    keys = metrics[0].group_accuracies.keys()
    accs = {
        k: float(np.mean([m.group_accuracies[k] for m in metrics])) for k in keys
    }
    return GroupMetrics(
        group_accuracies=accs,
        balanced_accuracy=float(
            np.mean([m.balanced_accuracy for m in metrics])
        ),
        worst_group_accuracy=float(
            np.mean([m.worst_group_accuracy for m in metrics])
        ),
    )


def grid_search_alpha_beta(
    bundle: FeatureBundle,
    rcs_star_spatial: np.ndarray,
    y: np.ndarray,
    a: np.ndarray,
    grid: list[tuple[float, float]],
    n_folds: int = 4,
    tolerance: float = 0.005,
) -> GridSearchReport:
    """Fold-based (alpha, beta) selection maximising tuning worst-group accuracy.

    For each evaluation fold the remaining folds act as the tuning set.
    Candidates must not decrease tuning worst-group accuracy below the
    unmasked baseline and must keep balanced accuracy within ``tolerance``
    (absolute) of the better of baseline and grid optimum. Ties prefer
    smaller alpha + beta, then lexicographic order. If nothing is feasible
    the identity mask (0, 0) is kept and flagged.
    """
    if not grid:
        raise EmptyGrid("empty (alpha, beta) grid")
    feature_shape = bundle.features.shape[2:]
    identity = build_mask(rcs_star_spatial, feature_shape, 0.0, 0.0)
    # (0, 0) yields W~ * 0, i.e. plain average pooling
    folds = make_folds(y, a, n_folds)
    masks = {
        (al, be): build_mask(rcs_star_spatial, feature_shape, al, be)
        for al, be in grid
    }

    selected, feasible_flags, per_fold = [], [], []
    base_preds_all = _classify(bundle, identity)
    test_preds = np.empty(len(y), dtype=int)
    for f, eval_idx in enumerate(folds):
        tune_idx = np.concatenate([folds[g] for g in range(n_folds) if g != f])
        base = group_metrics(
            base_preds_all[tune_idx], y[tune_idx], a[tune_idx]
        )
        scores = {}
        for point, mask in masks.items():
            preds = _classify(bundle, mask, tune_idx)
            scores[point] = group_metrics(preds, y[tune_idx], a[tune_idx])
        best_bacc = max(
            max(m.balanced_accuracy for m in scores.values()),
            base.balanced_accuracy,
        )
        feasible = [
            p
            for p, m in scores.items()
            if m.worst_group_accuracy >= base.worst_group_accuracy
            and m.balanced_accuracy >= best_bacc - tolerance
        ]
        if feasible:
            feasible.sort(key=lambda p: (-scores[p].worst_group_accuracy,
                                         p[0] + p[1], p))
            choice = feasible[0]
            flag = True
        else:
            choice = (0.0, 0.0)
            flag = False
        selected.append(choice)
        feasible_flags.append(flag)
        mask = masks.get(choice, identity)
        test_preds[eval_idx] = _classify(bundle, mask, eval_idx)
        eval_metrics = group_metrics(
            test_preds[eval_idx], y[eval_idx], a[eval_idx]
        )
        eval_baseline = group_metrics(
            base_preds_all[eval_idx], y[eval_idx], a[eval_idx]
        )
        per_fold.append(
            {
                "fold": f,
                "alpha": choice[0],
                "beta": choice[1],
                "feasible": flag,
                "tuning_baseline": base.to_dict(),
                "tuning_selected": scores.get(choice, base).to_dict(),
                "eval_baseline": eval_baseline.to_dict(),
                "eval_selected": eval_metrics.to_dict(),
            }
        )

    baseline_test = _average_metrics(
        [group_metrics(base_preds_all[fi], y[fi], a[fi]) for fi in folds]
    )
    attenuated_test = _average_metrics(
        [group_metrics(test_preds[fi], y[fi], a[fi]) for fi in folds]
    )
    return GridSearchReport(
        selected=selected,
        feasible=feasible_flags,
        baseline_test=baseline_test,
        attenuated_test=attenuated_test,
        per_fold=per_fold,
    )


def default_grid(stop: float = 2.0, step: float = 0.25) -> list[tuple[float, float]]:
    values = np.arange(0.0, stop + step / 2, step)
    return [(float(al), float(be)) for al in values for be in values]
