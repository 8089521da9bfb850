"""Shortcut-learning audit via dataset-level region rank profiles."""

from .correlations import (
    CorrelationResult,
    corr,
    deviation_corr,
    pairwise_corr,
    partial_corr,
    residualize,
)
from .inference import (
    BootstrapResult,
    InferenceResult,
    bootstrap_ci,
    permutation_test,
)
from .interchange import (
    AttributionMap,
    FeatureBundle,
    Manifest,
    load_manifest,
    preprocess_map,
    write_report,
)
from .partitioning import (
    Partition,
    atlas_partition,
    average_sobel,
    grid_partition,
    slic_partition,
)
from .pipeline import PipelineConfig, run_pipeline, stage_seed
from .rank_profiles import (
    RankProfile,
    aggregate_profiles,
    aggregate_then_rank,
    rank_scores,
    region_scores,
)
from .rcs import RcsMap, compute_rcs, compute_rcs_star, rasterize_rcs, shuffle_rcs
from .synth import SynthConfig, generate_synthetic, write_bundle

__all__ = [
    "AttributionMap",
    "BootstrapResult",
    "CorrelationResult",
    "FeatureBundle",
    "InferenceResult",
    "Manifest",
    "Partition",
    "PipelineConfig",
    "RankProfile",
    "RcsMap",
    "SynthConfig",
    "aggregate_profiles",
    "aggregate_then_rank",
    "atlas_partition",
    "average_sobel",
    "bootstrap_ci",
    "compute_rcs",
    "compute_rcs_star",
    "corr",
    "deviation_corr",
    "generate_synthetic",
    "grid_partition",
    "load_manifest",
    "pairwise_corr",
    "partial_corr",
    "permutation_test",
    "preprocess_map",
    "rank_scores",
    "rasterize_rcs",
    "region_scores",
    "residualize",
    "run_pipeline",
    "shuffle_rcs",
    "slic_partition",
    "stage_seed",
    "write_bundle",
    "write_report",
]

__version__ = "0.1.0"
