"""Region partitions of pixel space: regular grids, SLIC superpixels, atlases.

A Partition assigns every pixel (or voxel) to exactly one of n regions;
atlas background pixels carry the sentinel label -1 and are excluded from
all region statistics. All constructors are pure functions of their inputs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import BadK, EmptyInput, NoForeground, Not2D, NotDivisible

BACKGROUND = -1


@dataclass(frozen=True)
class Partition:
    """Label array covering a spatial shape with n mutually exclusive regions."""

    labels: np.ndarray  # int array, values in [0, n) or BACKGROUND
    n_regions: int
    region_sizes: np.ndarray  # int array, length n, all > 0

    @property
    def shape(self) -> tuple[int, ...]:
        return self.labels.shape

    def validate(self) -> None:
        """Recount labels and check the disjoint-cover invariants."""
        labels = self.labels
        fg = labels[labels != BACKGROUND]
        assert fg.size > 0, "partition has no foreground"
        assert fg.min() >= 0 and fg.max() < self.n_regions
        counts = np.bincount(fg, minlength=self.n_regions)
        assert (counts > 0).all(), "empty region"
        assert (counts == self.region_sizes).all(), "stale region_sizes"
        assert counts.sum() == fg.size


def _finish(labels: np.ndarray) -> Partition:
    fg = labels[labels != BACKGROUND]
    n = int(fg.max()) + 1
    sizes = np.bincount(fg, minlength=n)
    return Partition(labels=labels, n_regions=n, region_sizes=sizes)


def grid_partition(shape: tuple[int, ...], block: tuple[int, ...]) -> Partition:
    """Split ``shape`` into congruent axis-aligned blocks in raster order."""
    if len(shape) != len(block):
        raise NotDivisible("block rank does not match shape rank")
    for axis, (length, b) in enumerate(zip(shape, block)):
        if b <= 0 or length % b != 0:
            raise NotDivisible(f"axis {axis}: {length} not divisible by {b}")
    counts = tuple(length // b for length, b in zip(shape, block))
    indices = np.indices(shape)
    label = np.zeros(shape, dtype=np.int64)
    for axis, b in enumerate(block):
        label = label * counts[axis] + indices[axis] // b
    return _finish(label)


def average_sobel(images: list[np.ndarray]) -> np.ndarray:
    """Mean 3x3 Sobel gradient magnitude over a stack of 2D images."""
    if len(images) == 0:
        raise EmptyInput("no images")
    shape = images[0].shape
    if len(shape) != 2:
        raise Not2D("Sobel edge images are 2D only")
    total = np.zeros(shape, dtype=np.float64)
    for img in images:
        arr = np.asarray(img, dtype=np.float64)
        if arr.shape != shape:
            raise Not2D(f"image shape {arr.shape} != {shape}")
        gx = ndimage.sobel(arr, axis=1, mode="reflect")
        gy = ndimage.sobel(arr, axis=0, mode="reflect")
        total += np.hypot(gx, gy)
    return total / len(images)


def slic_partition(
    edge: np.ndarray,
    k: int,
    compactness: float = 10.0,
    iters: int = 10,
) -> Partition:
    """Deterministic SLIC on an edge image.

    Centers start on a regular sqrt(k)-spaced grid, perturbed to the
    lowest-gradient pixel in a 3x3 neighborhood; the assignment distance is
    sqrt(d_edge^2 + (compactness * d_xy / S)^2) with S = sqrt(N / k).
    Orphan connected components are merged into the largest adjacent
    region, so every returned region is 4-connected and nonempty.
    """
    edge = np.asarray(edge, dtype=np.float64)
    if edge.ndim != 2:
        raise Not2D("SLIC operates on 2D edge images only")
    h, w = edge.shape
    npix = h * w
    if not 1 <= k <= npix:
        raise BadK(f"k={k} outside [1, {npix}]")
    if k == 1:
        return _finish(np.zeros((h, w), dtype=np.int64))

    step = max(int(round(np.sqrt(npix / k))), 1)
    gy, gx = np.gradient(edge)
    grad = np.hypot(gx, gy)

    centers = _init_centers(edge, grad, k, step)
    n = len(centers)
    inv_s = compactness / np.sqrt(npix / k)

    ys, xs = np.indices((h, w))
    labels = np.full((h, w), -1, dtype=np.int64)
    dists = np.full((h, w), np.inf)
    for _ in range(iters):
        labels.fill(-1)
        dists.fill(np.inf)
        for idx in range(n):
            cy, cx, cv = centers[idx]
            y0, y1 = max(int(cy) - 2 * step, 0), min(int(cy) + 2 * step + 1, h)
            x0, x1 = max(int(cx) - 2 * step, 0), min(int(cx) + 2 * step + 1, w)
            dv = edge[y0:y1, x0:x1] - cv
            dy = ys[y0:y1, x0:x1] - cy
            dx = xs[y0:y1, x0:x1] - cx
            d = dv * dv + (dy * dy + dx * dx) * inv_s * inv_s
            window = dists[y0:y1, x0:x1]
            closer = d < window
            labels[y0:y1, x0:x1][closer] = idx
            window[closer] = d[closer]
        # Pixels outside every search window fall back to the nearest center.
        orphan = labels < 0
        if orphan.any():
            oy, ox = np.nonzero(orphan)
            cy = centers[:, 0][:, None]
            cx = centers[:, 1][:, None]
            d = (oy[None] - cy) ** 2 + (ox[None] - cx) ** 2
            labels[oy, ox] = d.argmin(axis=0)
        for idx in range(n):
            mask = labels == idx
            if mask.any():
                my, mx = np.nonzero(mask)
                centers[idx] = (my.mean(), mx.mean(), edge[mask].mean())
    labels = _enforce_connectivity(labels)
    return _finish(labels)


def _init_centers(edge, grad, k, step):
    h, w = edge.shape
    rows = max(int(round(h / step)), 1)
    cols = max(int(round(w / step)), 1)
    # Keep at most k seeds, dropping trailing grid positions.
    seeds = []
    for i in range(rows):
        for j in range(cols):
            y = int((i + 0.5) * h / rows)
            x = int((j + 0.5) * w / cols)
            seeds.append((min(y, h - 1), min(x, w - 1)))
    seeds = seeds[:k]
    centers = np.empty((len(seeds), 3))
    for idx, (y, x) in enumerate(seeds):
        y0, y1 = max(y - 1, 0), min(y + 2, h)
        x0, x1 = max(x - 1, 0), min(x + 2, w)
        patch = grad[y0:y1, x0:x1]
        off = np.unravel_index(int(patch.argmin()), patch.shape)
        py, px = y0 + off[0], x0 + off[1]
        centers[idx] = (py, px, edge[py, px])
    return centers


def _enforce_connectivity(labels: np.ndarray) -> np.ndarray:
    """Merge orphan 4-connected components into their largest neighbor."""
    structure = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]])
    out = np.full_like(labels, -1)
    next_label = 0
    components = []  # (size, mask) per connected component, largest kept
    for region in range(int(labels.max()) + 1):
        mask = labels == region
        if not mask.any():
            continue
        comp, ncomp = ndimage.label(mask, structure=structure)
        sizes = ndimage.sum_labels(mask, comp, index=range(1, ncomp + 1))
        keep = int(np.argmax(sizes)) + 1
        out[comp == keep] = next_label
        for c in range(1, ncomp + 1):
            if c != keep:
                components.append(comp == c)
        next_label += 1
    # Attach stray components to the most frequent adjacent kept label.
    pending = components
    while pending:
        rest = []
        for mask in pending:
            ring = ndimage.binary_dilation(mask, structure=structure) & ~mask
            neighbors = out[ring]
            neighbors = neighbors[neighbors >= 0]
            if neighbors.size == 0:
                rest.append(mask)
                continue
            out[mask] = np.bincount(neighbors).argmax()
        if len(rest) == len(pending):  # isolated islands, absorb into region 0
            for mask in rest:
                out[mask] = 0
            break
        pending = rest
    # Compact label ids in first-appearance order.
    used, inverse = np.unique(out, return_inverse=True)
    order = {old: new for new, old in enumerate(used)}
    return np.array([order[v] for v in used])[inverse].reshape(out.shape)


def atlas_partition(labels: np.ndarray, background: int = 0) -> Partition:
    """Re-index distinct non-background atlas labels to 0..n-1."""
    labels = np.asarray(labels)
    values = np.unique(labels)
    foreground = values[values != background]
    if foreground.size == 0:
        raise NoForeground("atlas contains only background")
    out = np.full(labels.shape, BACKGROUND, dtype=np.int64)
    for new, old in enumerate(foreground):
        out[labels == old] = new
    return _finish(out)
