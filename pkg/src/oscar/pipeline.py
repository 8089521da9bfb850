"""End-to-end audit: load, partition, profile, correlate, infer, localise,
and optionally attenuate, driven by one JSON config and one master seed."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from . import attenuation as atten
from . import correlations, inference, rcs
from .errors import BadConfig, IoError
from .interchange import Manifest, load_array, load_manifest, write_report
from .partitioning import (
    Partition,
    atlas_partition,
    average_sobel,
    grid_partition,
    slic_partition,
)
from .rank_profiles import aggregate_profiles, aggregate_then_rank, rank_matrix

MODEL_TAGS = ("BA", "TS", "SA")

# Fixed ids for the documented seed fan-out: each stage's seed is the first
# 64-bit word of SeedSequence([master_seed, stage_id]).
STAGE_IDS = {"permutation": 1, "bootstrap": 2, "shuffle": 3, "synth": 4}


def stage_seed(master_seed: int, stage: str) -> int:
    ss = np.random.SeedSequence([master_seed, STAGE_IDS[stage]])
    return int(ss.generate_state(1, np.uint64)[0])


@dataclass
class PipelineConfig:
    manifest: str
    partition: dict
    statistic: str = "mean"
    aggregation: str = "median"
    order: str = "rank-agg"
    correlations: list = field(
        default_factory=lambda: [
            {"kind": "pairwise", "a": "TS", "b": "SA", "method": "pearson"},
            {"kind": "partial", "a": "TS", "b": "SA", "c": "BA", "method": "pearson"},
            {"kind": "deviation", "a": "TS", "b": "SA", "c": "BA", "method": "pearson"},
        ]
    )
    n_perm: int = 10_000
    n_boot: int = 10_000
    level: float = 0.95
    rcs_roles: tuple = ("TS", "SA", "BA")
    rcs_star: bool = True
    shuffle_min_frac: float = 0.5
    attenuation_grid: dict = field(
        default_factory=lambda: {"stop": 2.0, "step": 0.25}
    )
    folds: int = 4
    seed: int = 0
    out_dir: str = "oscar-report"
    workers: int = 1

    @classmethod
    def from_file(cls, path: str) -> "PipelineConfig":
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except OSError as exc:
            raise IoError(str(exc)) from exc
        return cls.from_dict(doc, base=os.path.dirname(os.path.abspath(path)))

    @classmethod
    def from_dict(cls, doc: dict, base: str = ".") -> "PipelineConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - known
        if unknown:
            raise BadConfig(f"unknown config fields: {sorted(unknown)}")
        cfg = cls(**doc)
        cfg.manifest = os.path.join(base, cfg.manifest)
        if "path" in cfg.partition:
            cfg.partition = dict(cfg.partition)
            cfg.partition["path"] = os.path.join(base, cfg.partition["path"])
        cfg.rcs_roles = tuple(cfg.rcs_roles)
        return cfg

    def resolved(self) -> dict:
        # out_dir and workers are execution details: they never change the
        # numbers, so they stay out of the report to keep reruns byte-identical.
        doc = {
            k: getattr(self, k)
            for k in self.__dataclass_fields__
            if k not in ("out_dir", "workers")
        }
        doc["rcs_roles"] = list(self.rcs_roles)
        doc["stage_seeds"] = {
            stage: stage_seed(self.seed, stage) for stage in STAGE_IDS
        }
        return doc


def build_partition(spec: dict, manifest: Manifest | None = None) -> Partition:
    mode = spec.get("mode", "grid")
    if mode == "grid":
        shape = tuple(spec.get("shape") or manifest.shape)
        return grid_partition(shape, tuple(spec["block"]))
    if mode == "slic":
        if "edge" in spec:
            edge = load_array(spec["edge"])
        else:
            edge = _edge_image(manifest)
        return slic_partition(
            edge,
            k=int(spec["k"]),
            compactness=float(spec.get("compactness", 10.0)),
            iters=int(spec.get("iters", 10)),
        )
    if mode == "atlas":
        labels = load_array(spec["path"])
        return atlas_partition(labels, background=int(spec.get("background", 0)))
    if mode == "file":
        labels = load_array(spec["path"])
        sizes = np.bincount(labels[labels >= 0].ravel())
        return Partition(
            labels=labels, n_regions=len(sizes), region_sizes=sizes
        )
    raise BadConfig(f"unknown partition mode {mode!r}")


def _edge_image(manifest: Manifest) -> np.ndarray:
    if manifest.raw_paths is None:
        raise BadConfig("SLIC needs raw image paths in the manifest")
    images = [
        load_array(os.path.join(manifest.root, rel)) for rel in manifest.raw_paths
    ]
    return average_sobel(images)


def run_pipeline(config: PipelineConfig) -> dict:
    """Execute the full audit and write the report bundle.

    Returns the report dictionary that was serialized. All stochastic
    stages draw their seeds from the master seed through stage_seed, so a
    rerun with the same config is byte-identical regardless of workers.
    """
    manifest = load_manifest(config.manifest)
    partition = build_partition(config.partition, manifest)
    partition.validate()

    ranks = {}
    profiles = {}
    for tag in MODEL_TAGS:
        maps = manifest.load_maps(tag)
        if config.order == "agg-rank":
            profiles[tag] = aggregate_then_rank(
                maps, partition, config.statistic, model_tag=tag
            )
            ranks[tag] = rank_matrix(maps, partition, config.statistic)
        else:
            ranks[tag] = rank_matrix(maps, partition, config.statistic)
            profiles[tag] = aggregate_profiles(
                ranks[tag], config.aggregation, model_tag=tag
            )

    seed_perm = stage_seed(config.seed, "permutation")
    seed_boot = stage_seed(config.seed, "bootstrap")

    corr_results = []
    for spec in config.correlations:
        kind = spec["kind"]
        roles = (spec["a"], spec["b"]) + (
            (spec["c"],) if kind != "pairwise" else ()
        )
        method = spec.get("method", "pearson")
        a = profiles[spec["a"]].values
        b = profiles[spec["b"]].values
        c = profiles[spec["c"]].values if kind != "pairwise" else None
        rho = correlations.compute(kind, a, b, c, method, roles).rho
        p = inference.permutation_test(
            a,
            b,
            c,
            kind,
            method,
            n_perm=config.n_perm,
            seed=seed_perm,
            n_workers=config.workers,
        )
        boot = inference.bootstrap_ci(
            ranks,
            roles=(spec["a"], spec["b"], spec.get("c", "BA")),
            kind=kind,
            method=method,
            agg=config.aggregation,
            n_boot=config.n_boot,
            level=config.level,
            seed=seed_boot,
            n_workers=config.workers,
        )
        corr_results.append(
            {
                "kind": kind,
                "method": method,
                "roles": list(roles),
                "rho": rho,
                "p": p,
                "ci_lo": boot.ci_low,
                "ci_hi": boot.ci_high,
                "n_regions": int(partition.n_regions),
                "n_permutations": config.n_perm,
                "n_bootstrap": config.n_boot,
                "n_dropped_bootstrap": boot.n_dropped,
                "seed": config.seed,
            }
        )

    report: dict = {
        "config": config.resolved(),
        "n_images": manifest.m,
        "n_regions": int(partition.n_regions),
        "correlations": corr_results,
        "tables": {},
        "heatmaps": {},
    }

    role_a, role_b, role_c = config.rcs_roles
    rcs_map = rcs.compute_rcs(
        profiles[role_a].values,
        profiles[role_b].values,
        profiles[role_c].values,
        roles=config.rcs_roles,
    )
    report["rcs"] = {
        "roles": list(config.rcs_roles),
        "rho": rcs_map.rho,
        "identity_residual": float(
            abs(rcs_map.raw.sum() / (partition.n_regions - 1) - rcs_map.rho)
        ),
    }
    report["tables"]["rcs_raw"] = rcs_map.raw
    report["tables"]["rcs_normalised"] = rcs_map.normalised
    report["heatmaps"]["rcs"] = rcs.rasterize_rcs(rcs_map.normalised, partition)

    rcs_star = None
    if config.rcs_star:
        rcs_star = rcs.compute_rcs_star(
            profiles["TS"].values, profiles["SA"].values, profiles["BA"].values
        )
        report["tables"]["rcs_star"] = rcs_star
        report["heatmaps"]["rcs_star"] = rcs.rasterize_rcs(rcs_star, partition)

    if manifest.features_spec is not None and rcs_star is not None:
        report["attenuation"] = _run_attenuation(
            config, manifest, partition, rcs_star
        )

    write_report(report, config.out_dir)
    return report


def _run_attenuation(config, manifest, partition, rcs_star) -> dict:
    bundle = manifest.load_features()
    y, a = manifest.group_labels()
    spatial = rcs.rasterize_rcs(rcs_star, partition)
    grid = atten.default_grid(**config.attenuation_grid)
    result = atten.grid_search_alpha_beta(
        bundle, spatial, y, a, grid, n_folds=config.folds
    )
    out = {
        "baseline": result.baseline_test.to_dict(),
        "rcs_mask": result.attenuated_test.to_dict(),
        "selected": [list(p) for p in result.selected],
        "feasible": result.feasible,
        "per_fold": result.per_fold,
        "interpolation": "bilinear",
        "shuffle_metric": "toroidal per-axis displacement",
    }

    seed_shuffle = stage_seed(config.seed, "shuffle")
    shuffled_rows = []
    feature_shape = bundle.features.shape[2:]
    coarse = atten.bilinear_resize(spatial, tuple(feature_shape))
    for s in range(10):
        try:
            shuffled = rcs.shuffle_rcs(
                coarse, min_frac=config.shuffle_min_frac, seed=seed_shuffle + s
            )
        except Exception:
            break
        res = atten.grid_search_alpha_beta(
            bundle, shuffled, y, a, grid, n_folds=config.folds
        )
        shuffled_rows.append(res.attenuated_test)
    if shuffled_rows:
        bacc = [m.balanced_accuracy for m in shuffled_rows]
        wg = [m.worst_group_accuracy for m in shuffled_rows]
        out["shuffled_mask"] = {
            "n_shuffles": len(shuffled_rows),
            "balanced_accuracy_mean": float(np.mean(bacc)),
            "balanced_accuracy_sd": float(np.std(bacc, ddof=1)) if len(bacc) > 1 else 0.0,
            "worst_group_accuracy_mean": float(np.mean(wg)),
            "worst_group_accuracy_sd": float(np.std(wg, ddof=1)) if len(wg) > 1 else 0.0,
        }
    return out
