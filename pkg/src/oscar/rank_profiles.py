"""Per-image region rank vectors and their dataset-level aggregation.

Region scores are summarised per image, converted to fractional ranks
(1 = most important region, n = least), then aggregated componentwise
across the test set. All arithmetic is float64.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import EmptyInput, LengthMismatch, ShapeMismatch
from .partitioning import BACKGROUND, Partition


@dataclass(frozen=True)
class RankProfile:
    """Dataset-level aggregate of per-image rank vectors for one model."""

    model_tag: str
    values: np.ndarray
    aggregation: str
    n_images: int


def region_scores(
    values: np.ndarray, partition: Partition, statistic: str = "mean"
) -> np.ndarray:
    """Summarise one attribution map into a length-n region score vector.

    ``mean`` averages attribution inside each region. ``saliency`` is the
    fraction of region pixels at or above the image-wide median attribution
    (background pixels excluded from both the pool and the threshold).
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != partition.shape:
        raise ShapeMismatch(
            f"map shape {values.shape} != partition shape {partition.shape}"
        )
    labels = partition.labels.ravel()
    flat = values.ravel()
    fg = labels != BACKGROUND
    if statistic == "mean":
        sums = np.bincount(
            labels[fg], weights=flat[fg], minlength=partition.n_regions
        )
        return sums / partition.region_sizes
    if statistic == "saliency":
        threshold = np.percentile(flat[fg], 50, method="linear")
        survive = (flat >= threshold) & fg
        counts = np.bincount(
            labels[survive], minlength=partition.n_regions
        ).astype(np.float64)
        return counts / partition.region_sizes
    raise ValueError(f"unknown statistic {statistic!r}")


def rank_scores(scores: np.ndarray) -> np.ndarray:
    """Fractional descending ranks: highest score gets rank 1, ties averaged."""
    scores = np.asarray(scores, dtype=np.float64)
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    return rankdata(-scores, method="average")


def rank_matrix(
    maps: np.ndarray, partition: Partition, statistic: str = "mean"
) -> np.ndarray:
    """Stack per-image rank vectors into an (m, n) matrix."""
    return np.stack(
        [rank_scores(region_scores(m, partition, statistic)) for m in maps]
    )


def aggregate_profiles(
    rank_vectors: np.ndarray | list[np.ndarray],
    op: str = "median",
    model_tag: str = "",
) -> RankProfile:
    """Componentwise median (even m -> midpoint) or mean of rank vectors."""
    if len(rank_vectors) == 0:
        raise EmptyInput("no rank vectors to aggregate")
    matrix = np.asarray(rank_vectors, dtype=np.float64)
    if matrix.ndim != 2:
        raise LengthMismatch("rank vectors differ in length")
    if op == "median":
        values = np.median(matrix, axis=0)
    elif op == "mean":
        values = matrix.mean(axis=0)
    else:
        raise ValueError(f"unknown aggregation {op!r}")
    return RankProfile(
        model_tag=model_tag,
        values=values,
        aggregation=op,
        n_images=matrix.shape[0],
    )


def aggregate_then_rank(
    maps: np.ndarray,
    partition: Partition,
    statistic: str = "mean",
    model_tag: str = "",
) -> RankProfile:
    """Comparison mode: mean region scores across images, then one ranking."""
    if len(maps) == 0:
        raise EmptyInput("no maps")
    scores = np.mean(
        [region_scores(m, partition, statistic) for m in maps], axis=0
    )
    return RankProfile(
        model_tag=model_tag,
        values=rank_scores(scores),
        aggregation="agg-rank",
        n_images=len(maps),
    )
