"""Region Contribution Score maps: per-region signed shares of the partial
correlation, their l1 normalisation, the shortcut-minus-task combination,
the displaced-shuffle control, and rasterisation onto a partition."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .correlations import partial_corr, residualize
from .errors import DegenerateProfile, Infeasible, LengthMismatch
from .partitioning import BACKGROUND, Partition


@dataclass(frozen=True)
class RcsMap:
    raw: np.ndarray  # z_A * z_B per region; sums to (n-1) * rho
    normalised: np.ndarray  # same signs, sum of |.| equals 1
    rho: float
    roles: tuple[str, str, str]


def compute_rcs(
    a: np.ndarray,
    b: np.ndarray,
    c: np.ndarray,
    roles: tuple[str, str, str] = ("TS", "SA", "BA"),
) -> RcsMap:
    """Elementwise product of z-scored residuals of a and b given c.

    z-scores use the (n-1)-denominator sample standard deviation, so the
    raw values decompose the partial correlation exactly:
    sum(raw) / (n - 1) == rho.
    """
    result = partial_corr(a, b, c, method="pearson", roles=roles)
    e_a = residualize(np.asarray(a, dtype=np.float64), np.asarray(c, dtype=np.float64))
    e_b = residualize(np.asarray(b, dtype=np.float64), np.asarray(c, dtype=np.float64))
    n = e_a.size
    z_a = (e_a - e_a.mean()) / e_a.std(ddof=1)
    z_b = (e_b - e_b.mean()) / e_b.std(ddof=1)
    raw = z_a * z_b
    total = np.abs(raw).sum()
    if total == 0.0:
        raise DegenerateProfile("all region contributions are zero")
    return RcsMap(raw=raw, normalised=raw / total, rho=result.rho, roles=roles)


def compute_rcs_star(
    ts: np.ndarray, sa: np.ndarray, ba: np.ndarray
) -> np.ndarray:
    """Difference of normalised RCS maps: shortcut-aligned minus task-aligned.

    Positive entries mark regions whose residual rank structure follows the
    sensitive-attribute model, negative ones regions aligned with the
    baseline's task evidence.
    """
    shortcut = compute_rcs(ts, sa, ba, roles=("TS", "SA", "BA"))
    task = compute_rcs(ts, ba, sa, roles=("TS", "BA", "SA"))
    return shortcut.normalised - task.normalised


def shuffle_rcs(
    rcs_spatial: np.ndarray,
    min_frac: float = 0.5,
    seed: int = 0,
    max_attempts: int = 10_000,
) -> np.ndarray:
    """Displace every cell value far from its origin, preserving the multiset.

    Each value must end up at toroidal distance >= ceil(min_frac * axis)
    on every axis (hence Chebyshev displacement >= ceil(min_frac *
    max(H, W))). Built from a random cyclic shift composed with random
    constraint-preserving swaps; raises Infeasible when no shift satisfies
    the bound.
    """
    grid = np.asarray(rcs_spatial, dtype=np.float64)
    if grid.ndim != 2:
        raise Infeasible("shuffle operates on 2D maps")
    h, w = grid.shape
    t_y = int(np.ceil(min_frac * h))
    t_x = int(np.ceil(min_frac * w))

    def tor(d: np.ndarray, length: int) -> np.ndarray:
        d = np.mod(d, length)
        return np.minimum(d, length - d)

    shifts_y = [d for d in range(h) if tor(np.array(d), h) >= t_y]
    shifts_x = [d for d in range(w) if tor(np.array(d), w) >= t_x]
    if not shifts_y or not shifts_x:
        raise Infeasible(
            f"no cyclic shift moves every cell >= ({t_y}, {t_x}) on a {h}x{w} map"
        )

    rng = np.random.default_rng(seed)
    dy = int(rng.choice(shifts_y))
    dx = int(rng.choice(shifts_x))

    # source[i] = flat origin index of the value now at flat position i
    ys, xs = np.divmod(np.arange(h * w), w)
    source = np.mod(ys - dy, h) * w + np.mod(xs - dx, w)

    def ok(dest: np.ndarray, src: np.ndarray) -> np.ndarray:
        dyv = tor(dest // w - src // w, h)
        dxv = tor(dest % w - src % w, w)
        return (dyv >= t_y) & (dxv >= t_x)

    positions = np.arange(h * w)
    for _ in range(max_attempts):
        i, j = rng.integers(0, h * w, size=2)
        if i == j:
            continue
        si, sj = source[i], source[j]
        if ok(np.array([i, j]), np.array([sj, si])).all():
            source[i], source[j] = sj, si
    assert ok(positions, source).all()
    return grid.ravel()[source].reshape(h, w)


def rasterize_rcs(values: np.ndarray, partition: Partition) -> np.ndarray:
    """Paint each region's value over its pixels; background stays 0."""
    values = np.asarray(values, dtype=np.float64)
    if values.size != partition.n_regions:
        raise LengthMismatch(
            f"{values.size} values for {partition.n_regions} regions"
        )
    out = np.zeros(partition.shape, dtype=np.float64)
    fg = partition.labels != BACKGROUND
    out[fg] = values[partition.labels[fg]]
    return out
