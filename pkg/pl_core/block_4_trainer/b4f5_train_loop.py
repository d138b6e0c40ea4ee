# Folder: platter/pl_core/block_4_trainer
# File:   b4f5_train_loop.py

from __future__ import annotations

import logging
import time
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import torch
from tqdm import tqdm

from pl_core.block_1_data.b1f0_dataset import ImageDataset, check_image_size
from pl_core.block_1_data.b1f4_batch_iterator import b1f4_batch_iterator, epoch_order
from pl_core.block_2_model.b2f2_init_params import (
    ModelParams,
    b2f2_init_params,
    make_generator,
    one_hot,
    sample_categories,
    sample_latent,
)
from pl_core.block_2_model.b2f3_forward import images_to_tensor
from pl_core.block_2_model.b2f4_checkpoint import b2f4_load_checkpoint, b2f4_save_checkpoint, checkpoint_name
from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.block_4_trainer.b4f1_schedule import b4f1_lr_at
from pl_core.block_4_trainer.b4f2_stage_d import AbortGuard, b4f2_train_step_d
from pl_core.block_4_trainer.b4f3_stage_eg import b4f3_train_step_eg
from pl_core.block_4_trainer.b4f4_train_log import TrainLog
from pl_core.errors import ConfigError

__all__ = ["b4f5_train", "preflight", "TRAIN_LOG_NAME", "CHECKPOINT_DIR"]

log = logging.getLogger(__name__)

TRAIN_LOG_NAME = "train_log.csv"
CHECKPOINT_DIR = "checkpoints"
EpochHook = Callable[[int, ModelParams, TrainLog], None]


def preflight(shape_set: ImageDataset, texture_set: ImageDataset, config: TrainConfig) -> List[str]:
    """Every dataset/config contract violation, collected before any step runs."""
    problems: List[str] = []
    if shape_set.size == 0:
        problems.append("shape_set is empty")
    if texture_set.size == 0:
        problems.append("texture_set is empty")
    if shape_set.size and texture_set.size and shape_set.image_shape != texture_set.image_shape:
        problems.append(f"image sizes differ: shape {shape_set.image_shape} vs texture {texture_set.image_shape}")
    shp = shape_set.image_shape or texture_set.image_shape
    if shp is not None:
        if shp[0] != shp[1]:
            problems.append(f"images must be square, got {shp}")
        elif not check_image_size(shp[0]):
            problems.append(f"image size {shp[0]} is not a multiple of 32 (>= 32)")
    if config.conditional:
        if not texture_set.is_labelled:
            problems.append("conditional=true needs category labels on every texture image")
        if texture_set.num_categories is None:
            problems.append("conditional=true needs a texture set with num_categories")
    return problems


def _zc(params: ModelParams, n: int, gen: torch.Generator, conditional: bool) -> tuple:
    cfg = params.config
    z = sample_latent(n, cfg.latent_dim, gen).to(device=params.device, dtype=params.dtype)
    c = None
    if conditional:
        c = one_hot(sample_categories(n, cfg.num_categories, gen), cfg.num_categories).to(params.device, params.dtype)
    return z, c


def b4f5_train(
    shape_set: ImageDataset,
    texture_set: ImageDataset,
    config: TrainConfig,
    output_dir: Optional[str | Path] = None,
    resume_from: Optional[str | Path] = None,
    progress: bool = False,
    on_epoch_end: Optional[EpochHook] = None,
) -> Dict[str, Any]:
    """
    B4F5 — Trainer.Train
    Per shape batch: one D stage, then one E/G stage (1:1), fresh z per stage, c uniform over
    categories when conditional. Shape batches follow the seeded epoch order; texture batches walk
    their own seeded order, wrapping around. Checkpoints land every `checkpoint_every` epochs and at the end.
    Output:
      {"status": "OK", "params": ModelParams, "log": TrainLog, "checkpoints": [path], "diag": {...}}
    """
    problems = preflight(shape_set, texture_set, config)
    if problems:
        raise ConfigError("training pre-flight failed", problems)

    torch.use_deterministic_algorithms(config.deterministic, warn_only=True)
    k = texture_set.num_categories if config.conditional else None
    out_dir = Path(output_dir) if output_dir else None
    zc_gen = make_generator(config.seed + 1)
    start_epoch, step = 0, 0

    if resume_from:
        loaded = b2f4_load_checkpoint(resume_from, device=config.device, betas=config.betas)
        params = loaded["params"]
        if params.config.num_categories != k:
            raise ConfigError("checkpoint category count does not match the run", [f"checkpoint K={params.config.num_categories}, run K={k}"])
        start_epoch = loaded["epoch"] + 1
        step = int(loaded["extra"].get("next_step", 0))
        if "zc" in loaded["rng"]:
            zc_gen.set_state(loaded["rng"]["zc"])
        log.info("resuming from %s at epoch %d", resume_from, start_epoch)
    else:
        params = b2f2_init_params(
            shape_set.image_shape[0],
            num_categories=k,
            latent_dim=config.latent_dim,
            seed=config.seed,
            feature_channels=config.feature_channels,
            base_channels=config.base_channels,
            max_channels=config.max_channels,
        ).to(config.device)
    params.ensure_optimizers(config.lr_phase1, config.betas)

    train_log = TrainLog(out_dir / TRAIN_LOG_NAME if out_dir else None, keep_through_epoch=start_epoch - 1 if resume_from else None)
    guard = AbortGuard()
    checkpoints: List[str] = []
    t0 = time.perf_counter()
    bs = config.batch_size

    epochs = range(start_epoch, config.epochs_total)
    for epoch in tqdm(epochs, desc="epochs", disable=not progress):
        lr = b4f1_lr_at(config, epoch)
        params.set_lr(lr)
        tex_order = epoch_order(texture_set.size, config.seed + 1, epoch)

        for i, batch in enumerate(b1f4_batch_iterator(shape_set, bs, config.seed, epoch)):
            n = len(batch["indices"])
            tex_ix = [int(tex_order[(i * bs + j) % texture_set.size]) for j in range(n)]
            shape_t = images_to_tensor(batch["images"], params)
            tex_t = images_to_tensor(texture_set.images(tex_ix), params)
            real_c = None
            if k is not None:
                real_c = one_hot(texture_set.categories(tex_ix), k).to(params.device, params.dtype)

            z, c = _zc(params, n, zc_gen, k is not None)
            params, md = b4f2_train_step_d(params, shape_t, tex_t, z, c, config, texture_labels=real_c, guard=guard)
            train_log.append({**md, "epoch": epoch, "step": step, "lr": lr, "wall_time": time.perf_counter() - t0})
            step += 1

            z, c = _zc(params, n, zc_gen, k is not None)
            params, mg = b4f3_train_step_eg(params, shape_t, z, c, config, guard=guard)
            train_log.append({**mg, "epoch": epoch, "step": step, "lr": lr, "wall_time": time.perf_counter() - t0})
            step += 1

        last = epoch == config.epochs_total - 1
        if out_dir is not None and ((epoch + 1) % config.checkpoint_every == 0 or last):
            path = b2f4_save_checkpoint(
                out_dir / CHECKPOINT_DIR / checkpoint_name(epoch),
                params,
                epoch,
                rng_state={"zc": zc_gen.get_state()},
                extra={"next_step": step, "train_config": config.model_dump(mode="json")},
            )
            checkpoints.append(str(path))
        log.info(
            "epoch %d lr=%.1e d=%.4f recon=%.4f",
            epoch, lr, train_log.epoch_mean("d_loss", epoch), train_log.epoch_mean("recon", epoch),
        )
        if on_epoch_end is not None:
            on_epoch_end(epoch, params, train_log)

    return {
        "status": "OK",
        "params": params,
        "log": train_log,
        "checkpoints": checkpoints,
        "diag": {
            "reason": "ok",
            "epochs_run": max(0, config.epochs_total - start_epoch),
            "aborts": list(guard.diagnostics),
            "wall_time": time.perf_counter() - t0,
            "final_recon": train_log.epoch_mean("recon", config.epochs_total - 1),
        },
    }
