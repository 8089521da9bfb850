"""Export attribution bundles from three trained torch models.

Output is the audit toolkit's interchange layout — manifest.json plus one
.npy array per image per model — written directly, so the exporter never
imports the audit package itself.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np
import torch

from .errors import CheckpointMismatch
from .gradcam import feature_maps, final_linear_head, gradcam

MODEL_TAGS = ("BA", "TS", "SA")
MANIFEST_VERSION = 1

# Exported maps must carry unit l1 mass within this tolerance.
L1_ATOL = 1e-6


@dataclass
class ExportJob:
    checkpoints: dict[str, str]  # tag -> path, all of BA/TS/SA
    data_dir: str
    layer: str
    out_dir: str
    method: str = "gradcam"
    with_features: bool = False
    batch_size: int = 32
    labels: dict[str, tuple[int, int]] = field(default_factory=dict)

    def __post_init__(self):
        missing = [t for t in MODEL_TAGS if t not in self.checkpoints]
        if missing:
            raise CheckpointMismatch(f"missing checkpoints for {missing}")
        if self.method != "gradcam":
            raise ValueError(f"unknown attribution method {self.method!r}")


def load_model(path: str) -> torch.nn.Module:
    try:
        model = torch.load(path, map_location="cpu", weights_only=False)
    except Exception as exc:
        raise CheckpointMismatch(f"cannot load checkpoint {path}: {exc}") from exc
    if not isinstance(model, torch.nn.Module):
        raise CheckpointMismatch(
            f"{path} does not contain a serialized torch module"
        )
    return model


def load_dataset(data_dir: str) -> tuple[list[str], torch.Tensor]:
    """Read a directory of per-image .npy arrays (H x W or C x H x W)."""
    names = sorted(
        f for f in os.listdir(data_dir) if f.endswith(".npy")
    )
    if not names:
        raise CheckpointMismatch(f"no .npy images found in {data_dir}")
    arrays = []
    for name in names:
        arr = np.load(os.path.join(data_dir, name))
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3:
            raise CheckpointMismatch(f"{name}: images must be HxW or CxHxW")
        arrays.append(arr)
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise CheckpointMismatch(f"images disagree on shape: {sorted(shapes)}")
    ids = [os.path.splitext(n)[0] for n in names]
    return ids, torch.from_numpy(np.stack(arrays)).float()


def relu_l1(raw: np.ndarray) -> np.ndarray:
    """Clamp negatives and scale to unit l1 mass (interchange convention)."""
    values = np.maximum(np.asarray(raw, dtype=np.float64), 0.0)
    total = values.sum()
    if total == 0.0:
        # A flat zero map carries no evidence; export the uniform map so the
        # bundle stays valid rather than failing the whole run.
        return np.full(values.shape, 1.0 / values.size)
    return values / total


def load_labels(path: str) -> dict[str, tuple[int, int]]:
    with open(path) as fh:
        doc = json.load(fh)
    return {k: (int(v["y"]), int(v["a"])) for k, v in doc.items()}


def export_attributions(job: ExportJob) -> str:
    """Run Grad-CAM for every model over the dataset; returns manifest path."""
    ids, images = load_dataset(job.data_dir)
    os.makedirs(job.out_dir, exist_ok=True)

    models = {tag: load_model(path) for tag, path in job.checkpoints.items()}
    maps: dict[str, np.ndarray] = {}
    for tag, model in models.items():
        chunks = []
        for lo in range(0, len(ids), job.batch_size):
            batch = images[lo : lo + job.batch_size]
            try:
                cams = gradcam(model, job.layer, batch)
            except RuntimeError as exc:
                raise CheckpointMismatch(
                    f"{tag} model rejected the input batch: {exc}"
                ) from exc
            chunks.append(cams)
        maps[tag] = np.concatenate(chunks)
        if maps[tag].shape[1:] != tuple(images.shape[-2:]):
            raise CheckpointMismatch(
                f"{tag} attribution resolution {maps[tag].shape[1:]} "
                f"!= input resolution {tuple(images.shape[-2:])}"
            )

    entries = []
    for i, image_id in enumerate(ids):
        entry: dict = {"id": image_id}
        for tag in MODEL_TAGS:
            rel = f"{image_id}_{tag.lower()}.npy"
            processed = relu_l1(maps[tag][i])
            assert abs(processed.sum() - 1.0) < L1_ATOL
            np.save(os.path.join(job.out_dir, rel), processed)
            entry[tag.lower()] = rel
        if image_id in job.labels:
            entry["y"], entry["a"] = job.labels[image_id]
        entries.append(entry)

    doc: dict = {
        "version": MANIFEST_VERSION,
        "shape": list(images.shape[-2:]),
        "images": entries,
    }

    if job.with_features:
        feats = feature_maps(models["TS"], job.layer, images)
        weights, bias = final_linear_head(models["TS"])
        if weights.shape[1] != feats.shape[1]:
            raise CheckpointMismatch(
                f"head width {weights.shape[1]} != feature channels "
                f"{feats.shape[1]}; pick the layer feeding global pooling"
            )
        np.save(os.path.join(job.out_dir, "features.npy"), feats)
        np.save(os.path.join(job.out_dir, "head_weights.npy"), weights)
        np.save(os.path.join(job.out_dir, "head_bias.npy"), bias)
        doc["features"] = {
            "path": "features.npy",
            "weights": "head_weights.npy",
            "bias": "head_bias.npy",
        }

    manifest_path = os.path.join(job.out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path
