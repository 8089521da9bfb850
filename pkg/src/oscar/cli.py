"""Command line entry points. All logic lives in the library modules; the
subcommands only parse arguments, shuttle files, and map errors to exit
codes."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import attenuation as atten
from . import correlations, inference, rcs
from .errors import BadConfig, OscarError
from .interchange import load_array, load_manifest, save_array, write_report
from .partitioning import atlas_partition, grid_partition, slic_partition
from .pipeline import (
    PipelineConfig,
    build_partition,
    run_pipeline,
    stage_seed,
)
from .rank_profiles import aggregate_profiles, aggregate_then_rank, rank_matrix
from .synth import SynthConfig, generate_synthetic, write_bundle

MODEL_TAGS = ("BA", "TS", "SA")


def _parse_pair(text: str) -> tuple[int, int]:
    parts = text.lower().split("x")
    if len(parts) != 2:
        raise BadConfig(f"expected HxW, got {text!r}")
    return int(parts[0]), int(parts[1])


def _default_workers() -> int:
    return int(os.environ.get("OSCAR_WORKERS", "1"))


def _save_partition(partition, out: str) -> None:
    save_array(out, partition.labels)
    sidecar = os.path.splitext(out)[0] + ".json"
    with open(sidecar, "w") as fh:
        json.dump(
            {
                "n_regions": int(partition.n_regions),
                "region_sizes": [int(s) for s in partition.region_sizes],
            },
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")


def cmd_partition(args) -> int:
    if args.mode == "grid":
        shape = _parse_pair(args.shape) if args.shape else None
        if shape is None:
            shape = load_manifest(args.manifest).shape
        partition = grid_partition(shape, _parse_pair(args.block))
    elif args.mode == "slic":
        manifest = load_manifest(args.manifest)
        spec = {"mode": "slic", "k": args.k, "compactness": args.compactness,
                "iters": args.iters}
        if args.edge:
            spec["edge"] = args.edge
        partition = build_partition(spec, manifest)
    else:
        partition = atlas_partition(load_array(args.atlas), args.background)
    partition.validate()
    _save_partition(partition, args.out)
    print(f"wrote {args.out}: {partition.n_regions} regions")
    return 0


def _load_partition_file(path):
    from .partitioning import Partition

    labels = load_array(path)
    fg = labels[labels >= 0]
    sizes = np.bincount(fg.ravel())
    return Partition(labels=labels, n_regions=len(sizes), region_sizes=sizes)


def cmd_profile(args) -> int:
    manifest = load_manifest(args.manifest)
    partition = _load_partition_file(args.partition)
    os.makedirs(args.out, exist_ok=True)
    for tag in MODEL_TAGS:
        maps = manifest.load_maps(tag)
        ranks = rank_matrix(maps, partition, args.stat)
        save_array(os.path.join(args.out, f"ranks_{tag}.npy"), ranks)
        if args.order == "agg-rank":
            profile = aggregate_then_rank(maps, partition, args.stat, tag)
        else:
            profile = aggregate_profiles(ranks, args.agg, tag)
        save_array(os.path.join(args.out, f"profile_{tag}.npy"), profile.values)
    print(f"wrote profiles for {manifest.m} images to {args.out}")
    return 0


def _load_profiles(profile_dir):
    return {
        tag: load_array(os.path.join(profile_dir, f"profile_{tag}.npy"))
        for tag in MODEL_TAGS
    }


def cmd_correlate(args) -> int:
    profiles = _load_profiles(args.profiles)
    c = profiles[args.c] if args.kind != "pairwise" else None
    roles = (args.a, args.b) + ((args.c,) if args.kind != "pairwise" else ())
    result = correlations.compute(
        args.kind, profiles[args.a], profiles[args.b], c, args.method, roles
    )
    print(json.dumps({"kind": result.kind, "method": result.method,
                      "roles": list(result.roles), "rho": result.rho}))
    return 0


def cmd_infer(args) -> int:
    ranks = {
        tag: load_array(os.path.join(args.profiles, f"ranks_{tag}.npy"))
        for tag in MODEL_TAGS
    }
    roles = tuple(args.roles.split(","))
    result = inference.infer(
        ranks,
        roles=roles,
        kind=args.kind,
        method=args.method,
        agg=args.agg,
        n_perm=args.n_perm,
        n_boot=args.n_boot,
        level=args.level,
        seed_perm=stage_seed(args.seed, "permutation"),
        seed_boot=stage_seed(args.seed, "bootstrap"),
        n_workers=args.workers,
    )
    print(json.dumps(result.to_dict(), sort_keys=True))
    return 0


def cmd_rcs(args) -> int:
    profiles = _load_profiles(args.profiles)
    partition = _load_partition_file(args.partition)
    role_a, role_b, role_c = args.roles.split(",")
    os.makedirs(args.out, exist_ok=True)
    result: dict = {"tables": {}, "heatmaps": {}}
    rcs_map = rcs.compute_rcs(
        profiles[role_a], profiles[role_b], profiles[role_c],
        roles=(role_a, role_b, role_c),
    )
    result["rho"] = rcs_map.rho
    result["tables"]["rcs_raw"] = rcs_map.raw
    result["tables"]["rcs_normalised"] = rcs_map.normalised
    result["heatmaps"]["rcs"] = rcs.rasterize_rcs(rcs_map.normalised, partition)
    if args.star:
        star = rcs.compute_rcs_star(
            profiles["TS"], profiles["SA"], profiles["BA"]
        )
        spatial = rcs.rasterize_rcs(star, partition)
        result["tables"]["rcs_star"] = star
        result["heatmaps"]["rcs_star"] = spatial
        if args.shuffle:
            shuffled = rcs.shuffle_rcs(
                spatial, min_frac=args.min_frac,
                seed=stage_seed(args.seed, "shuffle"),
            )
            result["heatmaps"]["rcs_star_shuffled"] = shuffled
            result["shuffle"] = {
                "min_frac": args.min_frac,
                "metric": "toroidal per-axis displacement",
                "seed": args.seed,
            }
    write_report(result, args.out)
    print(f"wrote RCS outputs to {args.out}")
    return 0


def cmd_attenuate(args) -> int:
    manifest = load_manifest(args.manifest)
    bundle = manifest.load_features()
    y, a = manifest.group_labels()
    spatial = load_array(args.rcs_star)
    start, stop, step = (float(v) for v in args.grid.split(":"))
    values = np.arange(start, stop + step / 2, step)
    grid = [(float(al), float(be)) for al in values for be in values]
    report = atten.grid_search_alpha_beta(
        bundle, spatial, y, a, grid, n_folds=args.folds
    )
    out = {
        "baseline": report.baseline_test.to_dict(),
        "rcs_mask": report.attenuated_test.to_dict(),
        "selected": [list(p) for p in report.selected],
        "feasible": report.feasible,
        "per_fold": report.per_fold,
    }
    write_report(out, args.out)
    print(f"wrote attenuation report to {args.out}")
    return 0


def cmd_synth(args) -> int:
    side = int(round(np.sqrt(args.n)))
    if side * side != args.n:
        raise BadConfig("--n must be a perfect square for the default grid")
    cfg = SynthConfig(
        shape=(side * 4, side * 4),
        block=(4, 4),
        m=args.m,
        lam=args.lam,
        noise_sigma=args.sigma,
        seed=stage_seed(args.seed, "synth"),
    )
    dataset = generate_synthetic(cfg)
    manifest_path = write_bundle(dataset, args.out)
    print(f"wrote {manifest_path}")
    return 0


def cmd_run(args) -> int:
    config = PipelineConfig.from_file(args.config)
    if args.workers is not None:
        config.workers = args.workers
    report = run_pipeline(config)
    for entry in report["correlations"]:
        print(
            f"{entry['kind']:9s} rho={entry['rho']:+.4f} "
            f"p={entry['p']:.2e} ci=[{entry['ci_lo']:+.4f}, {entry['ci_hi']:+.4f}]"
        )
    print(f"report written to {config.out_dir}")
    return 0


def cmd_report(args) -> int:
    with open(os.path.join(args.dir, "report.json")) as fh:
        doc = json.load(fh)
    print(json.dumps(doc, indent=2, sort_keys=True))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="oscar", description="Shortcut-learning audit on attribution maps"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("partition", help="build a region partition")
    p.add_argument("--mode", choices=("grid", "slic", "atlas"), required=True)
    p.add_argument("--shape")
    p.add_argument("--block", default="16x16")
    p.add_argument("--manifest")
    p.add_argument("--k", type=int, default=64)
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--edge")
    p.add_argument("--atlas")
    p.add_argument("--background", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_partition)

    p = sub.add_parser("profile", help="compute rank profiles")
    p.add_argument("--manifest", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--stat", choices=("mean", "saliency"), default="mean")
    p.add_argument("--agg", choices=("median", "mean"), default="median")
    p.add_argument("--order", choices=("rank-agg", "agg-rank"), default="rank-agg")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("correlate", help="correlate stored profiles")
    p.add_argument("--profiles", required=True)
    p.add_argument("--kind", choices=("pairwise", "partial", "deviation"),
                   default="partial")
    p.add_argument("--a", default="TS")
    p.add_argument("--b", default="SA")
    p.add_argument("--c", default="BA")
    p.add_argument("--method", choices=("pearson", "spearman"), default="pearson")
    p.set_defaults(func=cmd_correlate)

    p = sub.add_parser("infer", help="permutation p-value and bootstrap CI")
    p.add_argument("--profiles", required=True)
    p.add_argument("--kind", choices=("pairwise", "partial", "deviation"),
                   default="partial")
    p.add_argument("--roles", default="TS,SA,BA")
    p.add_argument("--method", choices=("pearson", "spearman"), default="pearson")
    p.add_argument("--agg", choices=("median", "mean"), default="median")
    p.add_argument("--n-perm", type=int, default=10_000)
    p.add_argument("--n-boot", type=int, default=10_000)
    p.add_argument("--level", type=float, default=0.95)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--workers", type=int, default=_default_workers())
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("rcs", help="region contribution score maps")
    p.add_argument("--profiles", required=True)
    p.add_argument("--partition", required=True)
    p.add_argument("--roles", default="TS,SA,BA")
    p.add_argument("--star", action="store_true")
    p.add_argument("--shuffle", action="store_true")
    p.add_argument("--min-frac", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_rcs)

    p = sub.add_parser("attenuate", help="grid-searched weighted pooling")
    p.add_argument("--manifest", required=True)
    p.add_argument("--rcs-star", required=True)
    p.add_argument("--grid", default="0:2:0.25")
    p.add_argument("--folds", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_attenuate)

    p = sub.add_parser("synth", help="generate a synthetic bundle")
    p.add_argument("--lambda", dest="lam", type=float, default=0.5)
    p.add_argument("--m", type=int, default=200)
    p.add_argument("--n", type=int, default=64)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("run", help="full pipeline from a config file")
    p.add_argument("--config", required=True)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("report", help="print a stored report")
    p.add_argument("--dir", required=True)
    p.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except OscarError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return type(exc).exit_code


if __name__ == "__main__":
    sys.exit(main())
