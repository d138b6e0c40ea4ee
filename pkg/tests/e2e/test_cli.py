# Folder: platter/tests/e2e
# File:   test_cli.py

import csv
import json

import numpy as np
import pytest
from PIL import Image

from pl_runtime.cli.main import main
from pl_runtime.cli.manifest import read_manifest

TINY_RUN = {
    "image_size": 32,
    "train": {"latent_dim": 8, "feature_channels": 8, "base_channels": 8, "max_channels": 16, "batch_size": 4, "checkpoint_every": 1},
}


@pytest.fixture(autouse=True)
def _isolated_runs(tmp_path, monkeypatch):
    monkeypatch.setenv("PLATTER_OUTPUT_ROOT", str(tmp_path / "runs"))
    monkeypatch.setenv("PLATTER_DB", str(tmp_path / "runs.db"))


def _run(capsys, *argv):
    code = main([str(a) for a in argv])
    captured = capsys.readouterr()
    _run.last_err = captured.err
    out = captured.out.strip().splitlines()
    payload = json.loads(out[-1]) if code == 0 and out else None
    return code, payload


def _synth(capsys, out, seed=5, n=16, k=None):
    argv = ["synth", "--seed", seed, "--num-images", n, "--image-size", 32, "--output-dir", out]
    if k is not None:
        cfg = out.parent / f"synth_{out.name}.json"
        cfg.write_text(json.dumps({"num_categories": k}), encoding="utf-8")
        argv += ["--config", cfg]
    code, payload = _run(capsys, *argv)
    assert code == 0
    return read_manifest(payload["manifest"])


def _csv(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def test_synth_is_reproducible_and_replayable(tmp_path, capsys):
    a = _synth(capsys, tmp_path / "a")
    b = _synth(capsys, tmp_path / "b")
    assert a.checksums == b.checksums
    assert set(a.checksums) == {"shape", "texture"}
    assert a.seeds == {"synth": 5}
    assert a.metrics == {"shape": 8, "texture": 8}

    code, payload = _run(capsys, "replay", tmp_path / "a" / "run_manifest.json", "--output-dir", tmp_path / "c")
    assert code == 0
    assert read_manifest(payload["manifest"]).checksums == a.checksums


def test_synth_too_small_exits_with_config_error(capsys):
    code, _ = _run(capsys, "synth", "--num-images", 1, "--image-size", 32)
    assert code == 2
    assert "cannot be split" in _run.last_err


def test_train_with_missing_directory_exits_with_config_error(tmp_path, capsys):
    code, _ = _run(capsys, "train", "--shape-dir", tmp_path / "nope", "--texture-dir", tmp_path / "nope2", "--epochs", 1)
    assert code == 2


def test_unknown_checkpoint_is_data_error(tmp_path, capsys):
    (tmp_path / "in").mkdir()
    code, _ = _run(capsys, "generate", "--checkpoint", tmp_path / "missing.pt", "--inputs", tmp_path / "in")
    assert code == 3


def test_train_generate_eval_pipeline(tmp_path, capsys):
    data = tmp_path / "data"
    _synth(capsys, data, n=16, k=2)
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps(TINY_RUN), encoding="utf-8")

    code, payload = _run(
        capsys, "train", "--config", cfg,
        "--shape-dir", data / "shape", "--texture-dir", data / "texture",
        "--epochs", 1, "--seed", 3, "--conditional", "--output-dir", tmp_path / "train",
    )
    assert code == 0
    train = read_manifest(payload["manifest"])
    assert train.metrics["epochs_run"] == 1
    assert train.metrics["records"] == 2 * 2
    assert train.seeds["train"] == 3
    assert (tmp_path / "train" / "train_log.csv").is_file()
    assert (tmp_path / "train" / "resolved_config.json").is_file()
    ckpt = train.outputs["checkpoints"][-1]

    code, payload = _run(
        capsys, "generate", "--checkpoint", ckpt, "--inputs", data / "shape",
        "--styles-per-input", 2, "--limit", 2, "--sweep-categories", "--seed", 1, "--output-dir", tmp_path / "gen",
    )
    assert code == 0
    gen = read_manifest(payload["manifest"])
    assert gen.metrics == {"inputs": 2, "files": 2 * 2 + 2 * 2}
    assert (tmp_path / "gen" / "grid.png").is_file()
    assert (tmp_path / "gen" / "grid_categories.png").is_file()

    code, _ = _run(capsys, "generate", "--checkpoint", ckpt, "--inputs", data / "shape", "--category", 7)
    assert code == 2

    code, payload = _run(
        capsys, "eval", "--mode", "iou", "--generated", ckpt, "--reference", data / "shape",
        "--num-inputs", 2, "--styles-per-input", 2, "--seed", 0, "--output-dir", tmp_path / "iou",
    )
    assert code == 0
    rows = _csv(tmp_path / "iou" / "iou.csv")
    assert [r["input_id"] for r in rows][-2:] == ["mean", "min"]
    assert len(rows) == 2 * 2 + 2
    assert all(0.0 <= float(r["iou"]) <= 1.0 for r in rows)

    code, payload = _run(
        capsys, "eval", "--mode", "fid", "--generated", data / "texture", "--reference", data / "shape",
        "--classifier-epochs", 1, "--seed", 0, "--output-dir", tmp_path / "fid",
    )
    assert code == 0
    fid = read_manifest(payload["manifest"])
    assert fid.metrics["fid"] >= 0.0
    assert fid.metrics["extractor"] == "desk-classifier"
    assert (tmp_path / "fid" / "extractor.pt").is_file()

    code, payload = _run(
        capsys, "eval", "--mode", "per-category-fid", "--generated", ckpt, "--reference", data / "shape",
        "--shape-dir", data / "shape", "--num-samples", 3, "--classifier-epochs", 1, "--seed", 0,
        "--output-dir", tmp_path / "pcf",
    )
    assert code == 0
    rows = _csv(tmp_path / "pcf" / "per_category_fid.csv")
    assert [r["category"] for r in rows] == ["0", "1", "pooled"]
    assert all(r["fid"] != "" for r in rows)

    code, _ = _run(capsys, "runs", "--limit", 50)
    assert code == 0


def test_runs_lists_recorded_commands(tmp_path, capsys):
    _synth(capsys, tmp_path / "a", n=4)
    _run(capsys, "synth", "--num-images", 1, "--image-size", 32)
    assert main(["runs", "--filter", "synth"]) == 0
    lines = [json.loads(line) for line in capsys.readouterr().out.strip().splitlines()]
    assert len(lines) == 2
    assert sorted(r["exit_status"] for r in lines) == [0, 2]
    assert all(r["command"] == "synth" for r in lines)


def _train(capsys, tmp_path, data, *extra, run=None):
    cfg = tmp_path / "run_sized.json"
    cfg.write_text(json.dumps(run if run is not None else {"train": TINY_RUN["train"]}), encoding="utf-8")
    return _run(
        capsys, "train", "--config", cfg,
        "--shape-dir", data / "shape", "--texture-dir", data / "texture",
        "--epochs", 1, "--seed", 3, *extra,
    )


def test_train_takes_image_size_from_dataset_manifest(tmp_path, capsys):
    data = tmp_path / "data"
    _synth(capsys, data)
    code, payload = _train(capsys, tmp_path, data, "--output-dir", tmp_path / "train")
    assert code == 0
    assert read_manifest(payload["manifest"]).metrics["image_size"] == 32
    resolved = json.loads((tmp_path / "train" / "resolved_config.json").read_text(encoding="utf-8"))
    assert resolved["image_size"] == 32


def test_train_refuses_silent_resize(tmp_path, capsys):
    data = tmp_path / "data"
    _synth(capsys, data)
    code, _ = _train(capsys, tmp_path, data, "--image-size", 64)
    assert code == 2
    assert "differs from the dataset size 32" in _run.last_err

    code, payload = _train(capsys, tmp_path, data, "--image-size", 64, "--resize", "--output-dir", tmp_path / "big")
    assert code == 0
    assert read_manifest(payload["manifest"]).metrics["image_size"] == 64


def _labelled_scenes(root, n=4, size=32):
    rng = np.random.default_rng(0)
    lm = np.zeros((size, size), dtype=np.uint8)
    lm[2:12, 2:12] = 1
    lm[18:30, 16:30] = 2
    for i in range(n):
        for sub in ("apple", "masks/apple"):
            (root / sub).mkdir(parents=True, exist_ok=True)
        Image.fromarray(rng.integers(0, 256, size=(size, size, 3), dtype=np.uint8)).save(root / "apple" / f"s{i}.png")
        Image.fromarray(lm).save(root / "masks" / "apple" / f"s{i}.png")


def test_train_extracts_every_labelled_item(tmp_path, capsys):
    data = tmp_path / "data"
    _labelled_scenes(data / "shape")
    _labelled_scenes(data / "texture")
    code, payload = _train(
        capsys, tmp_path, data, "--image-size", 32, "--extract-items", "--output-dir", tmp_path / "train",
    )
    assert code == 0
    metrics = read_manifest(payload["manifest"]).metrics
    assert metrics["shape_items"] == 2 * 4
    assert metrics["texture_items"] == 2 * 4
