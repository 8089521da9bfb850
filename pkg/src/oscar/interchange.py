"""On-disk data model: manifests, attribution arrays, labels, features, reports.

Everything downstream of this module works on plain numpy arrays; this is the
only place that knows how bundles are laid out on disk. Arrays are stored in
the standard single-array .npy binary format (C-order, little-endian) and
manifests as versioned JSON, so bundles are portable and diffable.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMap,
    IdMismatch,
    IoError,
    MissingModel,
    ShapeMismatch,
)

MANIFEST_VERSION = 1
MODEL_TAGS = ("BA", "TS", "SA")

# Attribution sums are checked against 1 at this tolerance after l1 scaling.
L1_ATOL = 1e-9


@dataclass(frozen=True)
class AttributionMap:
    """A single per-image, per-model attribution array in pixel space."""

    image_id: str
    model_tag: str
    values: np.ndarray

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape


@dataclass
class FeatureBundle:
    """Penultimate feature maps plus the final linear head of one model."""

    features: np.ndarray  # B x C x H' x W'
    weights: np.ndarray  # K x C
    bias: np.ndarray  # K
    image_ids: list[str]

    def __post_init__(self):
        if self.features.ndim != 4:
            raise ShapeMismatch("features must be B x C x H' x W'")
        if self.features.shape[0] != len(self.image_ids):
            raise ShapeMismatch(
                f"{self.features.shape[0]} feature rows for "
                f"{len(self.image_ids)} image ids"
            )
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise ShapeMismatch("classifier weights must be K x C with K >= 2")
        if self.weights.shape[1] != self.features.shape[1]:
            raise ShapeMismatch("classifier width does not match feature channels")
        if self.bias.shape != (self.weights.shape[0],):
            raise ShapeMismatch("bias length does not match K")


@dataclass
class Manifest:
    """A validated bundle description: ids, per-model map paths, labels."""

    root: str
    shape: tuple[int, ...]
    image_ids: list[str]
    map_paths: dict[str, list[str]]  # model tag -> per-image paths
    labels: dict[str, tuple[int, int]] = field(default_factory=dict)
    raw_paths: list[str] | None = None
    features_spec: dict | None = None

    @property
    def m(self) -> int:
        return len(self.image_ids)

    def load_map(self, model_tag: str, index: int) -> AttributionMap:
        path = os.path.join(self.root, self.map_paths[model_tag][index])
        values = load_array(path).astype(np.float64)
        if values.shape != self.shape:
            raise ShapeMismatch(
                f"{path}: shape {values.shape} != manifest shape {self.shape}"
            )
        return AttributionMap(self.image_ids[index], model_tag, values)

    def load_maps(self, model_tag: str) -> np.ndarray:
        """Stack all maps of one model into an (m, *shape) float64 array."""
        return np.stack(
            [self.load_map(model_tag, i).values for i in range(self.m)]
        )

    def group_labels(self) -> tuple[np.ndarray, np.ndarray]:
        """Return (y, a) arrays aligned with image_ids."""
        if set(self.labels) != set(self.image_ids):
            raise IdMismatch("group labels do not cover the manifest ids")
        y = np.array([self.labels[i][0] for i in self.image_ids])
        a = np.array([self.labels[i][1] for i in self.image_ids])
        return y, a

    def load_features(self) -> FeatureBundle:
        if self.features_spec is None:
            raise IoError("manifest declares no feature bundle")
        spec = self.features_spec
        return FeatureBundle(
            features=load_array(os.path.join(self.root, spec["path"])).astype(
                np.float64
            ),
            weights=load_array(os.path.join(self.root, spec["weights"])).astype(
                np.float64
            ),
            bias=load_array(os.path.join(self.root, spec["bias"])).astype(
                np.float64
            ),
            image_ids=list(self.image_ids),
        )


def save_array(path: str, values: np.ndarray) -> None:
    """Write a single array in .npy format (bit-exact round trip)."""
    try:
        np.save(path, values)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_array(path: str) -> np.ndarray:
    try:
        return np.load(path)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def load_manifest(path: str) -> Manifest:
    """Load and validate a manifest JSON file.

    Raises MissingModel if any of BA/TS/SA is absent for some image,
    IdMismatch on inconsistent id lists, ShapeMismatch if any referenced
    array disagrees with the declared spatial shape.
    """
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise IoError(str(exc)) from exc

    root = os.path.dirname(os.path.abspath(path))
    shape = tuple(int(s) for s in doc["shape"])
    images = doc.get("images", [])
    if not images:
        raise EmptyManifestError()

    image_ids = [img["id"] for img in images]
    if len(set(image_ids)) != len(image_ids):
        raise IdMismatch("duplicate image ids in manifest")

    map_paths: dict[str, list[str]] = {}
    for tag in MODEL_TAGS:
        key = tag.lower()
        present = [img["id"] for img in images if key in img]
        if not present:
            raise MissingModel(f"no {tag} maps listed in manifest")
        if present != image_ids:
            raise IdMismatch(
                f"{tag} map list covers {len(present)} of {len(image_ids)} ids"
            )
        map_paths[tag] = [img[key] for img in images]

    labels = {}
    for img in images:
        if "y" in img or "a" in img:
            if "y" not in img or "a" not in img:
                raise IdMismatch(f"image {img['id']}: y and a must come together")
            labels[img["id"]] = (int(img["y"]), int(img["a"]))
    if labels and set(labels) != set(image_ids):
        raise IdMismatch("group labels cover only part of the manifest")

    raw_paths = None
    if all("raw" in img for img in images):
        raw_paths = [img["raw"] for img in images]

    manifest = Manifest(
        root=root,
        shape=shape,
        image_ids=image_ids,
        map_paths=map_paths,
        labels=labels,
        raw_paths=raw_paths,
        features_spec=doc.get("features"),
    )

    # Validate referenced arrays exist and share the declared shape. Memory
    # mapping keeps this cheap for large bundles.
    for tag in MODEL_TAGS:
        for rel in manifest.map_paths[tag]:
            full = os.path.join(root, rel)
            try:
                arr = np.load(full, mmap_mode="r")
            except OSError as exc:
                raise IoError(f"cannot read {full}: {exc}") from exc
            if arr.shape != shape:
                raise ShapeMismatch(
                    f"{full}: shape {arr.shape} != manifest shape {shape}"
                )
    return manifest


class EmptyManifestError(IdMismatch):
    def __init__(self):
        super().__init__("manifest lists no images")


def write_manifest(path: str, doc: dict) -> None:
    doc = dict(doc)
    doc.setdefault("version", MANIFEST_VERSION)
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True)
            fh.write("\n")
    except OSError as exc:
        raise IoError(str(exc)) from exc


def preprocess_map(raw: np.ndarray, mode: str = "relu_l1") -> np.ndarray:
    """Standardise a raw attribution array.

    relu_l1 clamps negatives to zero and scales to unit l1 mass; l1_only
    scales by the sum of absolute values without clamping; none passes
    through. Raises DegenerateMap when no mass remains.
    """
    values = np.asarray(raw, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise DegenerateMap("attribution map contains non-finite values")
    if mode == "none":
        return values
    if mode == "relu_l1":
        values = np.maximum(values, 0.0)
    elif mode != "l1_only":
        raise ValueError(f"unknown preprocessing mode {mode!r}")
    total = np.abs(values).sum()
    if total == 0.0:
        raise DegenerateMap("attribution map has zero mass")
    return values / total


def _json_ready(obj):
    if isinstance(obj, dict):
        return {str(k): _json_ready(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_ready(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_json_ready(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    return obj


def write_report(results: dict, out_dir: str) -> None:
    """Emit report.json plus CSV tables and heatmaps for any spatial maps.

    ``results`` may carry two special keys: ``tables`` (name -> length-n
    vector, written as CSV with a region,value header) and ``heatmaps``
    (name -> 2D array, written as PNG; signed data gets a diverging
    colormap centred at zero). Identical inputs yield byte-identical
    JSON/CSV output.
    """
    try:
        os.makedirs(out_dir, exist_ok=True)
        _write_report_files(results, out_dir)
    except OSError as exc:
        raise IoError(str(exc)) from exc


def _write_report_files(results: dict, out_dir: str) -> None:
    tables = results.get("tables", {})
    heatmaps = results.get("heatmaps", {})
    summary = {k: v for k, v in results.items() if k not in ("tables", "heatmaps")}

    with open(os.path.join(out_dir, "report.json"), "w") as fh:
        json.dump(_json_ready(summary), fh, indent=2, sort_keys=True)
        fh.write("\n")

    for name, vector in sorted(tables.items()):
        with open(os.path.join(out_dir, f"{name}.csv"), "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["region", "value"])
            for r, v in enumerate(np.asarray(vector).ravel()):
                writer.writerow([r, repr(float(v))])

    for name, grid in sorted(heatmaps.items()):
        _write_heatmap(os.path.join(out_dir, f"{name}.png"), np.asarray(grid))


def _write_heatmap(path: str, grid: np.ndarray) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if grid.min() < 0:
        bound = np.abs(grid).max() or 1.0
        plt.imsave(path, grid, cmap="coolwarm", vmin=-bound, vmax=bound)
    else:
        plt.imsave(path, grid, cmap="gray")
