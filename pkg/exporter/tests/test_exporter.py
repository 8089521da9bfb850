import json
import os

import numpy as np
import pytest
import torch

from oscar_export import (
    CheckpointMismatch,
    ExportJob,
    LayerNotFound,
    export_attributions,
    gradcam,
    relu_l1,
)
from oscar_export.cli import main

from tinynet import TinyNet, train_briefly

M = 16
SIDE = 16


def _make_images(seed=0):
    """Grayscale squares: a centre patch keyed to y, a corner patch to a."""
    rng = np.random.default_rng(seed)
    y = np.array([(i >> 1) & 1 for i in range(M)])
    a = np.array([i & 1 for i in range(M)])
    images = rng.normal(0, 0.1, size=(M, 1, SIDE, SIDE))
    for i in range(M):
        images[i, 0, 6:10, 6:10] += 2.0 * y[i] - 1.0
        images[i, 0, 0:4, 0:4] += (2.0 * a[i] - 1.0) * 1.5
    return images.astype(np.float32), y, a


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("export")
    images, y, a = _make_images()
    data_dir = root / "data"
    data_dir.mkdir()
    labels = {}
    for i in range(M):
        image_id = f"img{i:03d}"
        np.save(data_dir / f"{image_id}.npy", images[i])
        labels[image_id] = {"y": int(y[i]), "a": int(a[i])}
    with open(root / "labels.json", "w") as fh:
        json.dump(labels, fh)

    batch = torch.from_numpy(images)
    ckpts = {}
    for tag, target, seed in (
        ("BA", torch.from_numpy(y), 1),
        ("TS", torch.from_numpy(y), 2),
        ("SA", torch.from_numpy(a), 3),
    ):
        torch.manual_seed(seed)
        model = train_briefly(TinyNet(), batch, target, seed=seed)
        path = root / f"{tag.lower()}.pt"
        torch.save(model, path)
        ckpts[tag] = str(path)
    return {"root": root, "data": str(data_dir), "ckpts": ckpts}


def test_relu_l1_contract():
    out = relu_l1(np.array([-1.0, 1.0, 3.0]))
    np.testing.assert_allclose(out, [0.0, 0.25, 0.75])
    flat = relu_l1(np.full((2, 2), -1.0))
    assert flat.sum() == pytest.approx(1.0)


def test_gradcam_shape_and_nonnegativity(workspace):
    model = torch.load(
        workspace["ckpts"]["TS"], map_location="cpu", weights_only=False
    )
    images = torch.from_numpy(np.load(
        os.path.join(workspace["data"], "img000.npy")
    ))[None]
    cam = gradcam(model, "conv2", images)
    assert cam.shape == (1, SIDE, SIDE)
    assert cam.min() >= 0.0


def test_wrong_layer_name(workspace):
    model = torch.load(
        workspace["ckpts"]["TS"], map_location="cpu", weights_only=False
    )
    with pytest.raises(LayerNotFound):
        gradcam(model, "no_such_layer", torch.zeros(1, 1, SIDE, SIDE))


def test_bad_checkpoint(tmp_path, workspace):
    bogus = tmp_path / "bogus.pt"
    torch.save({"not": "a module"}, bogus)
    job = ExportJob(
        checkpoints={
            "BA": str(bogus),
            "TS": workspace["ckpts"]["TS"],
            "SA": workspace["ckpts"]["SA"],
        },
        data_dir=workspace["data"],
        layer="conv2",
        out_dir=str(tmp_path / "out"),
    )
    with pytest.raises(CheckpointMismatch):
        export_attributions(job)


def test_missing_checkpoint_tag(workspace, tmp_path):
    with pytest.raises(CheckpointMismatch):
        ExportJob(
            checkpoints={"BA": "x", "TS": "y"},
            data_dir=workspace["data"],
            layer="conv2",
            out_dir=str(tmp_path / "out"),
        )


@pytest.fixture(scope="module")
def exported(workspace, tmp_path_factory):
    out = str(tmp_path_factory.mktemp("bundle"))
    rc = main(
        [
            "--ba", workspace["ckpts"]["BA"],
            "--ts", workspace["ckpts"]["TS"],
            "--sa", workspace["ckpts"]["SA"],
            "--data", workspace["data"],
            "--method", "gradcam",
            "--layer", "conv2",
            "--labels", str(workspace["root"] / "labels.json"),
            "--features",
            "--out", out,
        ]
    )
    assert rc == 0
    return out


def test_cli_exports_complete_bundle(exported):
    with open(os.path.join(exported, "manifest.json")) as fh:
        doc = json.load(fh)
    assert len(doc["images"]) == M
    assert doc["shape"] == [SIDE, SIDE]
    assert doc["features"]["path"] == "features.npy"
    # 3 models x M images
    maps = [f for f in os.listdir(exported) if f.startswith("img")]
    assert len(maps) == 3 * M


def test_maps_sum_to_one(exported):
    for name in os.listdir(exported):
        if not name.startswith("img"):
            continue
        arr = np.load(os.path.join(exported, name))
        assert arr.sum() == pytest.approx(1.0, abs=1e-6), name
        assert arr.min() >= 0.0


def test_core_validation_and_idempotence(exported):
    core = pytest.importorskip("oscar")
    manifest = core.load_manifest(os.path.join(exported, "manifest.json"))
    assert manifest.m == M
    for tag in ("BA", "TS", "SA"):
        maps = manifest.load_maps(tag)
        for values in maps:
            again = core.preprocess_map(values, "relu_l1")
            np.testing.assert_allclose(again, values, atol=1e-6)
    bundle = manifest.load_features()
    assert bundle.features.shape == (M, 6, SIDE, SIDE)
    assert bundle.weights.shape == (2, 6)


def test_core_pipeline_end_to_end(exported, tmp_path):
    pipeline = pytest.importorskip("oscar.pipeline")
    out = str(tmp_path / "report")
    config = pipeline.PipelineConfig(
        manifest=os.path.join(exported, "manifest.json"),
        partition={"mode": "grid", "block": [4, 4]},
        n_perm=300,
        n_boot=300,
        seed=17,
        out_dir=out,
    )
    report = pipeline.run_pipeline(config)
    assert report["n_images"] == M
    assert report["correlations"]
    assert "rcs" in report
    assert "attenuation" in report
    assert os.path.exists(os.path.join(out, "report.json"))
