# Folder: platter/pl_runtime/cli
# File:   commands.py

from __future__ import annotations

import json
import logging
import re
import time
import uuid
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from pl_core.block_1_data.b1f0_dataset import ImageDataset
from pl_core.block_1_data.b1f1_ingest_directory import MANIFEST_NAME, b1f1_ingest_directory
from pl_core.block_1_data.b1f2_extract_masked_items import b1f2_extract_dataset_items
from pl_core.block_1_data.b1f3_synthesize_dataset import SynthSpec, b1f3_synthesize_dataset
from pl_core.block_1_data.b1f5_persist_dataset import MASK_SUBDIR, b1f5_save_dataset
from pl_core.block_2_model.b2f2_init_params import ModelParams, make_generator, sample_latent
from pl_core.block_2_model.b2f4_checkpoint import b2f4_load_checkpoint
from pl_core.block_4_trainer.b4f5_train_loop import TRAIN_LOG_NAME, b4f5_train
from pl_core.block_5_metrics.b5f3_extractors import (
    FeatureExtractor,
    b5f3_train_desk_classifier,
    load_extractor,
    load_imported,
    save_extractor,
)
from pl_core.block_5_metrics.b5f4_fid import b5f4_compute_fid, b5f4_fid_from_features, b5f4_per_category_fid
from pl_core.block_5_metrics.b5f6_shape_report import (
    b5f6_generate_samples,
    b5f6_generate_styles,
    b5f6_shape_preservation_report,
    b5f6_sweep_categories,
)
from pl_core.block_5_metrics.b5f7_reports import (
    FID_FIELDS,
    IOU_FIELDS,
    fid_report_rows,
    iou_report_rows,
    render_grid,
    save_png,
    write_csv_report,
)
from pl_core.errors import ConfigError, DataError, PlatterError
from pl_drivers.storage.run_store import list_runs, record_run
from pl_runtime.cli.config_io import TrainRunConfig, deep_merge, load_json, output_root, validate_model
from pl_runtime.cli.manifest import RunManifest, read_manifest, sha1_json, tree_checksum, write_manifest

__all__ = [
    "execute",
    "cmd_synth",
    "cmd_train",
    "cmd_generate",
    "cmd_eval",
    "replay",
    "runs_table",
    "resolve_seed",
    "EVAL_MODES",
    "COMMANDS",
]

log = logging.getLogger(__name__)

EVAL_MODES = ("fid", "per-category-fid", "iou")
FEATURE_SUFFIX = ".feat"
CHECKPOINT_SUFFIX = ".pt"
RESOLVED_CONFIG = "resolved_config.json"

# FAIL reasons from dataset operations and the error class each maps to
_FAIL_ERRORS = {"cannot_split": ConfigError, "not_a_directory": DataError, "no_images": DataError}

Command = Callable[..., None]


def resolve_seed(seed: Optional[int]) -> int:
    """User seed, or a fresh one drawn from OS entropy (it is recorded in the manifest either way)."""
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy % (2**31 - 1))


def _fail(result: Dict[str, Any], what: str) -> PlatterError:
    diag = result.get("diag") or {}
    reason = diag.get("reason", "unknown")
    err = _FAIL_ERRORS.get(reason, DataError)
    msg = f"{what}: {diag.get('message', reason)}"
    if err is ConfigError:
        return ConfigError(msg, [reason])
    return err(msg, {"reason": reason, "errors": diag.get("errors", [])})


def _dataset_size(path: str | Path) -> Optional[int]:
    mf = Path(path) / MANIFEST_NAME
    if not mf.is_file():
        return None
    try:
        shape = json.loads(mf.read_text(encoding="utf-8")).get("image_size")
    except ValueError:
        return None
    return int(shape[0]) if isinstance(shape, list) and shape else None


def _ingest(path: str | Path, size: int, what: str, mask_subdir: Optional[str] = None) -> ImageDataset:
    if mask_subdir is None and (Path(path) / MASK_SUBDIR).is_dir():
        mask_subdir = MASK_SUBDIR
    res = b1f1_ingest_directory(path, size, mask_subdir=mask_subdir)
    if res["status"] != "OK":
        raise _fail(res, what)
    return res["dataset"]


def _load_params(checkpoint: str | Path) -> ModelParams:
    return b2f4_load_checkpoint(checkpoint)["params"].eval()


def _safe_stem(name: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.-]+", "_", Path(name).with_suffix("").as_posix())


# ------------------------- execution wrapper -------------------------

def execute(command: str, fn: Command, output_dir: Optional[str | Path] = None, **kwargs: Any) -> Dict[str, Any]:
    """
    Runs one command into its output directory. The manifest is written (atomically) and the run
    recorded whether the command succeeds or raises; errors are re-raised after recording.
    Output: {"status": "OK", "run_id", "output_dir", "manifest_path", "manifest": RunManifest}
    """
    run_id = uuid.uuid4().hex[:12]
    out = Path(output_dir) if output_dir else output_root() / command / run_id
    out.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest(command=command, run_id=run_id)
    t0 = time.perf_counter()
    error: Optional[BaseException] = None
    try:
        fn(manifest, out, **kwargs)
    except PlatterError as e:
        manifest.exit_status = e.exit_code
        manifest.error = e.to_dict()
        error = e
    except Exception as e:
        manifest.exit_status = 1
        manifest.error = {"kind": e.__class__.__name__, "message": str(e), "details": {}}
        error = e
    manifest.wall_time = time.perf_counter() - t0
    path = write_manifest(manifest, out)
    try:
        record_run(run_id, command, manifest.exit_status, str(path), str(out), manifest.wall_time, manifest.started_at, manifest.metrics)
    except Exception as e:  # bookkeeping only
        log.warning("run registry unavailable: %s", e)
    if error is not None:
        if isinstance(error, PlatterError):
            error.details.setdefault("manifest_path", str(path))
        raise error
    log.info("%s finished in %.1fs -> %s", command, manifest.wall_time, out)
    return {"status": "OK", "run_id": run_id, "output_dir": str(out), "manifest_path": str(path), "manifest": manifest}


# ------------------------- synth -------------------------

def cmd_synth(
    manifest: RunManifest,
    out: Path,
    config: Optional[str] = None,
    spec: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
    num_images: Optional[int] = None,
    image_size: Optional[int] = None,
) -> None:
    body = deep_merge(spec if spec is not None else load_json(config), {"seed": seed, "num_images": num_images, "image_size": image_size})
    body["seed"] = resolve_seed(body.get("seed"))
    synth_spec = validate_model(SynthSpec, body, "synth spec")
    spec_echo = synth_spec.model_dump(mode="json")
    manifest.config = {"args": {"spec": spec_echo}}
    manifest.seeds = {"synth": synth_spec.seed}
    manifest.inputs = {"config": config}

    res = b1f3_synthesize_dataset(synth_spec)
    if res["status"] != "OK":
        raise _fail(res, "synthesis failed")
    for role in ("shape", "texture"):
        b1f5_save_dataset(res[f"{role}_set"], out / role, {"role": role, "spec": spec_echo})
        manifest.outputs[f"{role}_dir"] = str(out / role)
        manifest.checksums[role] = tree_checksum(out / role)
    manifest.metrics = {k: res[f"{k}_set"].size for k in ("shape", "texture")}


# ------------------------- train -------------------------

def _train_size(rc: TrainRunConfig) -> int:
    """Raster side for training: the manifests' recorded size unless an explicit resize is asked for."""
    recorded = {what: _dataset_size(getattr(rc, what)) for what in ("shape_dir", "texture_dir")}
    known = {s for s in recorded.values() if s is not None}
    if rc.image_size is None:
        if len(known) > 1:
            raise ConfigError("training pre-flight failed", [f"image_size: shape and texture manifests disagree ({recorded})"])
        if not known:
            raise ConfigError("training pre-flight failed", ["image_size: required when the datasets carry no manifest"])
        return known.pop()
    clash = sorted(s for s in known if s != rc.image_size)
    if clash and not rc.resize:
        raise ConfigError("training pre-flight failed", [
            f"image_size: {rc.image_size} differs from the dataset size {clash[0]}; set resize to resample",
        ])
    return rc.image_size


def _extract(ds: ImageDataset, what: str) -> ImageDataset:
    if not ds.has_masks:
        raise DataError(f"{what}: extract_items needs a mask for every image")
    res = b1f2_extract_dataset_items(ds)
    if res["status"] != "OK":
        raise _fail(res, what)
    return res["dataset"]


def cmd_train(
    manifest: RunManifest,
    out: Path,
    config: Optional[str] = None,
    run: Optional[Dict[str, Any]] = None,
    shape_dir: Optional[str] = None,
    texture_dir: Optional[str] = None,
    resume_from: Optional[str] = None,
    seed: Optional[int] = None,
    epochs: Optional[int] = None,
    batch_size: Optional[int] = None,
    lam: Optional[float] = None,
    conditional: Optional[bool] = None,
    image_size: Optional[int] = None,
    resize: Optional[bool] = None,
    extract_items: Optional[bool] = None,
) -> None:
    body = deep_merge(run if run is not None else load_json(config), {
        "shape_dir": shape_dir,
        "texture_dir": texture_dir,
        "resume_from": resume_from,
        "image_size": image_size,
        "resize": resize,
        "extract_items": extract_items,
        "train": {"seed": seed, "batch_size": batch_size, "conditional": conditional, "loss": {"lambda_recon": lam}},
    })
    train_body = body.setdefault("train", {})
    train_body["seed"] = resolve_seed(train_body.get("seed"))
    rc = validate_model(TrainRunConfig, body, "training config")
    cfg = rc.train
    if epochs is not None:
        if epochs < 1:
            raise ConfigError("invalid training config", ["--epochs: must be >= 1"])
        cfg = cfg.truncated(epochs)
    rc = rc.model_copy(update={"train": cfg})
    problems = rc.path_problems()
    if problems:
        raise ConfigError("training pre-flight failed", problems)
    rc = rc.model_copy(update={"image_size": _train_size(rc)})

    resolved = rc.model_dump(mode="json")
    manifest.config = {"args": {"run": resolved}}
    manifest.seeds = {"train": cfg.seed, "data_order": cfg.seed, "latent": cfg.seed + 1}
    manifest.inputs = {"config": config, "shape_dir": rc.shape_dir, "texture_dir": rc.texture_dir, "resume_from": rc.resume_from}
    (out / RESOLVED_CONFIG).write_text(json.dumps(resolved, indent=2, ensure_ascii=False), encoding="utf-8")

    shape_set = _ingest(rc.shape_dir, rc.image_size, "shape_dir", rc.mask_subdir)
    texture_set = _ingest(rc.texture_dir, rc.image_size, "texture_dir", rc.mask_subdir)
    if rc.extract_items:
        shape_set = _extract(shape_set, "shape_dir")
        texture_set = _extract(texture_set, "texture_dir")
    result = b4f5_train(shape_set, texture_set, cfg, output_dir=out, resume_from=rc.resume_from, progress=True)

    train_log = result["log"]
    manifest.outputs = {
        "checkpoints": result["checkpoints"],
        "train_log": str(out / TRAIN_LOG_NAME),
        "resolved_config": str(out / RESOLVED_CONFIG),
    }
    manifest.checksums = {"metric_sequence": sha1_json(train_log.metric_sequence())}
    manifest.metrics = {
        "epochs_run": result["diag"]["epochs_run"],
        "records": len(train_log),
        "final_recon": result["diag"]["final_recon"],
        "aborts": len(result["diag"]["aborts"]),
        "image_size": rc.image_size,
        "shape_items": shape_set.size,
        "texture_items": texture_set.size,
    }


# ------------------------- generate -------------------------

def cmd_generate(
    manifest: RunManifest,
    out: Path,
    checkpoint: str,
    inputs: str,
    styles_per_input: int = 8,
    category: Optional[int] = None,
    seed: Optional[int] = None,
    sweep: bool = False,
    limit: Optional[int] = None,
) -> None:
    seed = resolve_seed(seed)
    manifest.config = {"args": {
        "checkpoint": checkpoint, "inputs": inputs, "styles_per_input": styles_per_input,
        "category": category, "seed": seed, "sweep": sweep, "limit": limit,
    }}
    manifest.seeds = {"latent": seed}
    manifest.inputs = {"checkpoint": checkpoint, "inputs": inputs}

    params = _load_params(checkpoint)
    if category is not None and params.config.num_categories is None:
        raise ConfigError("--category given for a checkpoint trained without categories")
    if sweep and params.config.num_categories is None:
        raise ConfigError("category sweep needs a checkpoint trained with categories")
    ds = _ingest(inputs, params.config.image_size, "inputs")
    items = list(ds.items[:limit] if limit else ds.items)
    images = np.stack([it.image for it in items])

    img_dir = out / "images"
    outs = b5f6_generate_styles(params, images, styles_per_input, seed, category)
    files: List[str] = []
    for it, styles in zip(items, outs):
        for j, y in enumerate(styles):
            files.append(str(save_png(y, img_dir / f"{_safe_stem(it.name)}_s{j:02d}.png")))
    manifest.outputs = {"images": files, "grid": str(render_grid(outs, out / "grid.png"))}

    if sweep:
        k = params.config.num_categories
        z = sample_latent(1, params.config.latent_dim, make_generator(seed))
        sweeps = np.stack([b5f6_sweep_categories(params, img, z, range(k)) for img in images])
        for it, row in zip(items, sweeps):
            for c, y in enumerate(row):
                files.append(str(save_png(y, img_dir / f"{_safe_stem(it.name)}_c{c:02d}.png")))
        manifest.outputs["category_grid"] = str(render_grid(sweeps, out / "grid_categories.png"))
    manifest.checksums = {"images": tree_checksum(img_dir)}
    manifest.metrics = {"inputs": len(items), "files": len(files)}


# ------------------------- eval -------------------------

def _resolve_extractor(name: str, reference: ImageDataset, seed: int, out: Path, epochs: int) -> FeatureExtractor:
    if name == "desk":
        extractor = b5f3_train_desk_classifier(reference, epochs=epochs, seed=seed)
        save_extractor(extractor, out / "extractor.pt")
        return extractor
    if name.endswith(CHECKPOINT_SUFFIX):
        return load_extractor(name)
    raise ConfigError(f"unknown extractor {name!r}", ["--extractor: 'desk' or a saved extractor .pt file"])


def _eval_fid_features(manifest: RunManifest, out: Path, generated: str, reference: str) -> None:
    gen = load_imported(generated)
    ref = load_imported(reference, expected_name=gen.name)
    fid = b5f4_fid_from_features(gen.features, ref.features)
    rows = [{"category": "all", "name": gen.name, "n_generated": len(gen.features), "n_reference": len(ref.features), "fid": fid, "warning": ""}]
    manifest.outputs = {"report": str(write_csv_report(out / "fid.csv", rows, FID_FIELDS))}
    manifest.metrics = {"fid": fid, "extractor": gen.name, "extractor_version": ref.version}


def cmd_eval(
    manifest: RunManifest,
    out: Path,
    mode: str,
    generated: str,
    reference: str,
    extractor: str = "desk",
    seed: Optional[int] = None,
    num_samples: Optional[int] = None,
    shape_dir: Optional[str] = None,
    styles_per_input: int = 8,
    num_inputs: int = 5,
    category: Optional[int] = None,
    image_size: Optional[int] = None,
    classifier_epochs: int = 8,
) -> None:
    if mode not in EVAL_MODES:
        raise ConfigError(f"unknown eval mode {mode!r}", [f"--mode: one of {', '.join(EVAL_MODES)}"])
    seed = resolve_seed(seed)
    manifest.config = {"args": {
        "mode": mode, "generated": generated, "reference": reference, "extractor": extractor, "seed": seed,
        "num_samples": num_samples, "shape_dir": shape_dir, "styles_per_input": styles_per_input,
        "num_inputs": num_inputs, "category": category, "image_size": image_size, "classifier_epochs": classifier_epochs,
    }}
    manifest.seeds = {"eval": seed}
    manifest.inputs = {"generated": generated, "reference": reference, "shape_dir": shape_dir}

    if mode == "fid" and generated.endswith(FEATURE_SUFFIX) and reference.endswith(FEATURE_SUFFIX):
        _eval_fid_features(manifest, out, generated, reference)
        return

    from_ckpt = Path(generated).is_file() and generated.endswith(CHECKPOINT_SUFFIX)
    if not from_ckpt and not Path(generated).is_dir():
        raise DataError(f"generated input not found: {generated}")
    params = _load_params(generated) if from_ckpt else None
    size = params.config.image_size if params is not None else (image_size or _dataset_size(reference) or 64)

    if mode == "iou":
        if params is None:
            raise ConfigError("iou mode needs a checkpoint as the generated input")
        ds = _ingest(reference, size, "reference")
        if not ds.has_masks:
            raise DataError(f"iou mode needs masks under {Path(reference) / MASK_SUBDIR}")
        picked = ds.items[:num_inputs]
        report = b5f6_shape_preservation_report(
            [(it.image, it.mask) for it in picked], params, styles_per_input, seed,
            background_color=ds.background_color or (0, 0, 0), category=category,
            input_ids=[it.name for it in picked],
        )
        manifest.outputs = {"report": str(write_csv_report(out / "iou.csv", iou_report_rows(report), IOU_FIELDS))}
        manifest.metrics = {"mean_iou": report.mean_iou, "min_iou": report.min_iou, "rows": len(report.rows)}
        return

    ref_ds = _ingest(reference, size, "reference")
    feat = _resolve_extractor(extractor, ref_ds, seed, out, classifier_epochs)
    if extractor == "desk":
        manifest.outputs["extractor"] = str(out / "extractor.pt")

    def _shapes() -> ImageDataset:
        if not shape_dir:
            raise ConfigError("evaluating a checkpoint needs shape inputs", ["--shape-dir: required with a checkpoint"])
        return _ingest(shape_dir, size, "shape_dir")

    if mode == "fid":
        if params is not None:
            gen_ds = b5f6_generate_samples(params, _shapes(), num_samples or ref_ds.size, seed, category)
        else:
            gen_ds = _ingest(generated, size, "generated")
        fid = b5f4_compute_fid(gen_ds, ref_ds, feat)
        rows = [{"category": "all", "name": feat.name, "n_generated": gen_ds.size, "n_reference": ref_ds.size, "fid": fid, "warning": ""}]
        manifest.outputs["report"] = str(write_csv_report(out / "fid.csv", rows, FID_FIELDS))
        manifest.metrics = {"fid": fid, "extractor": feat.name, "extractor_version": feat.version}
        return

    # per-category-fid
    if not ref_ds.is_labelled:
        raise ConfigError("per-category FID needs a labelled reference set")
    ref_by = ref_ds.by_category()
    if params is not None:
        if params.config.num_categories is None:
            raise ConfigError("per-category FID from a checkpoint needs a conditional checkpoint")
        shapes = _shapes()
        gen_by = {
            k: b5f6_generate_samples(params, shapes, num_samples or ref_by[k].size, seed + k, k)
            for k in sorted(ref_by)
        }
    else:
        gen_by = _ingest(generated, size, "generated").by_category()
    result = b5f4_per_category_fid(gen_by, ref_by, feat, category_names=ref_ds.category_names)
    if result["status"] != "OK":
        raise _fail(result, "per-category FID")
    manifest.outputs["report"] = str(write_csv_report(out / "per_category_fid.csv", fid_report_rows(result), FID_FIELDS))
    manifest.metrics = {
        "pooled": result["pooled"],
        "per_category": {str(r["name"]): r["fid"] for r in result["rows"] if r["category"] != "pooled"},
        "skipped": result["diag"]["skipped"],
        "extractor": feat.name,
        "extractor_version": feat.version,
    }


# ------------------------- registry views -------------------------

COMMANDS: Dict[str, Command] = {
    "synth": cmd_synth,
    "train": cmd_train,
    "generate": cmd_generate,
    "eval": cmd_eval,
}


def replay(manifest_path: str, output_dir: Optional[str] = None) -> Dict[str, Any]:
    """Re-executes a recorded run from its manifest's argument echo (seeds included)."""
    old = read_manifest(manifest_path)
    fn = COMMANDS.get(old.command)
    if fn is None:
        raise ConfigError(f"manifest command {old.command!r} cannot be replayed")
    args = dict(old.config.get("args") or {})
    return execute(old.command, fn, output_dir=output_dir, **args)


def runs_table(limit: int = 20, command: Optional[str] = None) -> List[Dict[str, Any]]:
    return list_runs(limit=limit, command=command)

