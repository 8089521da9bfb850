"""Synthetic attribution bundles with planted task and shortcut structure.

The generator builds a (BA, TS, SA) map triplet around two latent templates
whose mass sits on disjoint region sets, with the TS template blending them
under a mixing weight lambda. It also emits group labels and a linearly
separable feature bundle in which a shortcut feature predicts the sensitive
attribute and drives minority-group errors at a rate that grows with
lambda, so the whole audit and attenuation pipeline can be exercised
without any trained model.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, field

import numpy as np

from .errors import BadConfig
from .interchange import FeatureBundle, preprocess_map, save_array, write_manifest
from .partitioning import Partition, grid_partition


@dataclass
class SynthConfig:
    shape: tuple[int, int] = (32, 32)
    block: tuple[int, int] = (4, 4)
    m: int = 200
    lam: float = 0.5
    noise_sigma: float = 0.1
    task_regions: tuple[int, ...] = ()
    shortcut_regions: tuple[int, ...] = ()
    seed: int = 0
    feature_noise: float = 0.02

    def __post_init__(self):
        if not 0.0 <= self.lam <= 1.0:
            raise BadConfig("lambda must lie in [0, 1]")
        if self.noise_sigma < 0:
            raise BadConfig("noise_sigma must be nonnegative")
        if self.m < 1:
            raise BadConfig("need at least one image")
        gh, gw = self.grid_dims
        n = gh * gw
        if not self.task_regions or not self.shortcut_regions:
            task, shortcut = default_region_sets(gh, gw)
            if not self.task_regions:
                self.task_regions = task
            if not self.shortcut_regions:
                self.shortcut_regions = shortcut
        for r in (*self.task_regions, *self.shortcut_regions):
            if not 0 <= r < n:
                raise BadConfig(f"region index {r} outside [0, {n})")
        if set(self.task_regions) & set(self.shortcut_regions):
            raise BadConfig("task and shortcut region sets must be disjoint")

    @property
    def grid_dims(self) -> tuple[int, int]:
        if any(s % b for s, b in zip(self.shape, self.block)):
            raise BadConfig("block must divide shape")
        return tuple(s // b for s, b in zip(self.shape, self.block))


def default_region_sets(gh: int, gw: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Shortcut cells in the top-left corner quarter, task cells mid-grid."""
    qh, qw = max(gh // 4, 1), max(gw // 4, 1)
    shortcut = tuple(
        i * gw + j for i in range(qh) for j in range(qw)
    )
    ti0, tj0 = gh // 2, gw // 2
    task = tuple(
        i * gw + j
        for i in range(ti0, min(ti0 + qh, gh))
        for j in range(tj0, min(tj0 + qw, gw))
    )
    return task, shortcut


@dataclass
class SynthDataset:
    config: SynthConfig
    partition: Partition
    maps: dict[str, np.ndarray]  # tag -> (m, H, W)
    image_ids: list[str]
    y: np.ndarray
    a: np.ndarray
    bundle: FeatureBundle
    rcs_truth: dict = field(default_factory=dict)


# Planted boost per region. Slightly above the ramp spread (0.10), so planted
# regions always top the noise-free ranking, yet a lambda-scaled fraction of
# it reorders the shortcut regions past the ramp gradually rather than all at
# once -- this keeps the lambda sweep smooth instead of saturating.
_BOOST = 0.12


def _template(partition: Partition, regions: tuple[int, ...]) -> np.ndarray:
    """Piecewise-constant mass on a region set over a smooth ramp background."""
    h, w = partition.shape
    ramp = np.linspace(0.05, 0.15, h * w).reshape(h, w)
    tmpl = ramp.copy()
    mask = np.isin(partition.labels, regions)
    tmpl[mask] += _BOOST
    return tmpl


def generate_synthetic(cfg: SynthConfig) -> SynthDataset:
    """Deterministic bundle for the given config; per-image seeded noise."""
    partition = grid_partition(cfg.shape, cfg.block)
    t_task = _template(partition, cfg.task_regions)
    t_shortcut = _template(partition, cfg.shortcut_regions)
    ts_template = (1.0 - cfg.lam) * t_task + cfg.lam * t_shortcut

    maps = {tag: np.empty((cfg.m, *cfg.shape)) for tag in ("BA", "TS", "SA")}
    for i in range(cfg.m):
        rng = np.random.default_rng((cfg.seed, i))
        for tag, template in (
            ("BA", t_task),
            ("TS", ts_template),
            ("SA", t_shortcut),
        ):
            noise = rng.normal(0.0, cfg.noise_sigma, cfg.shape)
            maps[tag][i] = preprocess_map(template + noise, "relu_l1")

    y = np.array([(i >> 1) & 1 for i in range(cfg.m)]) % 2
    a = np.array([i & 1 for i in range(cfg.m)])

    bundle = _feature_bundle(cfg, partition, y, a)
    image_ids = [f"img{i:05d}" for i in range(cfg.m)]
    return SynthDataset(
        config=cfg,
        partition=partition,
        maps=maps,
        image_ids=image_ids,
        y=y,
        a=a,
        bundle=bundle,
    )


def _feature_bundle(
    cfg: SynthConfig, partition: Partition, y: np.ndarray, a: np.ndarray
) -> FeatureBundle:
    """Two-channel features: a task channel on task cells driven by y, and a
    shortcut channel on shortcut cells driven by a whose amplitude grows
    with lambda, so the linear head errs on discordant groups."""
    gh, gw = cfg.grid_dims
    n_cells = gh * gw
    task_mask = np.zeros((gh, gw))
    task_mask.ravel()[list(cfg.task_regions)] = 1.0
    shortcut_mask = np.zeros((gh, gw))
    shortcut_mask.ravel()[list(cfg.shortcut_regions)] = 1.0

    k_task = task_mask.sum()
    k_short = shortcut_mask.sum()
    base_amp = 2.0 * cfg.lam * (k_task / k_short)

    feats = np.empty((cfg.m, 2, gh, gw))
    rng = np.random.default_rng((cfg.seed, 0xFEA7))
    for i in range(cfg.m):
        y_sign = 2.0 * y[i] - 1.0
        a_sign = 2.0 * a[i] - 1.0
        amp = base_amp * rng.uniform(0.5, 1.5)
        feats[i, 0] = y_sign * task_mask + rng.normal(
            0.0, cfg.feature_noise, (gh, gw)
        )
        feats[i, 1] = a_sign * amp * shortcut_mask + rng.normal(
            0.0, cfg.feature_noise, (gh, gw)
        )
    weights = np.array([[-1.0, -1.0], [1.0, 1.0]]) * n_cells / k_task
    bias = np.zeros(2)
    return FeatureBundle(
        features=feats,
        weights=weights,
        bias=bias,
        image_ids=[f"img{i:05d}" for i in range(cfg.m)],
    )


def write_bundle(dataset: SynthDataset, out_dir: str) -> str:
    """Write the dataset as an interchange bundle; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    images = []
    for i, image_id in enumerate(dataset.image_ids):
        entry = {"id": image_id}
        for tag in ("BA", "TS", "SA"):
            rel = f"{image_id}_{tag.lower()}.npy"
            save_array(os.path.join(out_dir, rel), dataset.maps[tag][i])
            entry[tag.lower()] = rel
        entry["y"] = int(dataset.y[i])
        entry["a"] = int(dataset.a[i])
        images.append(entry)

    save_array(os.path.join(out_dir, "features.npy"), dataset.bundle.features)
    save_array(os.path.join(out_dir, "head_weights.npy"), dataset.bundle.weights)
    save_array(os.path.join(out_dir, "head_bias.npy"), dataset.bundle.bias)
    save_array(
        os.path.join(out_dir, "partition.npy"), dataset.partition.labels
    )

    manifest_path = os.path.join(out_dir, "manifest.json")
    write_manifest(
        manifest_path,
        {
            "shape": list(dataset.config.shape),
            "images": images,
            "features": {
                "path": "features.npy",
                "weights": "head_weights.npy",
                "bias": "head_bias.npy",
            },
        },
    )
    return manifest_path
