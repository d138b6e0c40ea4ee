# Folder: platter/pl_core/block_2_model
# File:   b2f4_checkpoint.py

from __future__ import annotations

import logging
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Optional

import torch

from pl_core.block_2_model.b2f1_networks import ModelConfig
from pl_core.block_2_model.b2f2_init_params import NETWORKS, ModelParams, build_from_config
from pl_core.errors import ConfigError, DataError

__all__ = ["b2f4_save_checkpoint", "b2f4_load_checkpoint", "checkpoint_name", "CHECKPOINT_FORMAT", "CHECKPOINT_VERSION"]

log = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "platter-ckpt"
CHECKPOINT_VERSION = 1


def checkpoint_name(epoch: int) -> str:
    return f"ckpt_epoch{epoch:04d}.pt"


def _now_z() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def b2f4_save_checkpoint(
    path: str | Path,
    params: ModelParams,
    epoch: int,
    rng_state: Optional[Dict[str, torch.Tensor]] = None,
    extra: Optional[Dict[str, Any]] = None,
) -> Path:
    """
    B2F4 — Model.SaveCheckpoint
    One archive: {format, version, config, config_hash, <network>: state_dict, optimizers, epoch, rng, extra}.
    Written to a temp file and renamed into place.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    blob: Dict[str, Any] = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "created_at": _now_z(),
        "config": params.config.model_dump(),
        "config_hash": params.config.config_hash(),
        "epoch": int(epoch),
        "optimizers": {
            "d": params.opt_d.state_dict() if params.opt_d is not None else None,
            "eg": params.opt_eg.state_dict() if params.opt_eg is not None else None,
        },
        "rng": dict(rng_state or {}),
        "extra": dict(extra or {}),
    }
    for name, net in params.networks().items():
        blob[name] = {k: v.detach().to("cpu") for k, v in net.state_dict().items()}

    tmp = target.with_suffix(target.suffix + ".tmp")
    torch.save(blob, tmp)
    os.replace(tmp, target)
    log.info("checkpoint written: %s (epoch %d)", target, epoch)
    return target


def b2f4_load_checkpoint(
    path: str | Path,
    expected_config: Optional[ModelConfig] = None,
    device: Any = "cpu",
    betas: Optional[tuple] = None,
) -> Dict[str, Any]:
    """
    B2F4 — Model.LoadCheckpoint
    Returns {"params": ModelParams, "epoch": int, "rng": {...}, "extra": {...}}.
    Rejects unknown formats/versions, corrupted config echoes and configs that differ from expected_config.
    Optimizer state is restored when present (betas default to the stored ones).
    """
    p = Path(path)
    if not p.is_file():
        raise DataError(f"checkpoint not found: {p}")
    try:
        blob = torch.load(p, map_location="cpu", weights_only=True)
    except Exception as e:  # torch raises a variety of unpickling errors
        raise DataError(f"unreadable checkpoint {p}: {e.__class__.__name__}: {e}")

    if not isinstance(blob, dict) or blob.get("format") != CHECKPOINT_FORMAT:
        raise DataError(f"{p} is not a {CHECKPOINT_FORMAT} archive")
    if blob.get("version") != CHECKPOINT_VERSION:
        raise DataError(f"unsupported checkpoint version {blob.get('version')}")

    cfg = ModelConfig(**blob["config"])
    if cfg.config_hash() != blob.get("config_hash"):
        raise DataError("checkpoint config echo does not match its stored hash")
    if expected_config is not None and expected_config.config_hash() != cfg.config_hash():
        raise ConfigError(
            "checkpoint config differs from the requested model config",
            [f"{k}: checkpoint={v!r} requested={getattr(expected_config, k)!r}"
             for k, v in cfg.model_dump().items() if getattr(expected_config, k) != v],
        )

    params = build_from_config(cfg, seed=0)
    for name in NETWORKS:
        params.networks()[name].load_state_dict(blob[name])
    params.to(device)

    opts = blob.get("optimizers") or {}
    if opts.get("d") is not None or opts.get("eg") is not None:
        stored = (opts.get("d") or opts.get("eg"))["param_groups"][0]
        params.ensure_optimizers(lr=float(stored["lr"]), betas=tuple(betas or stored["betas"]))
        if opts.get("d") is not None:
            params.opt_d.load_state_dict(opts["d"])
        if opts.get("eg") is not None:
            params.opt_eg.load_state_dict(opts["eg"])

    return {"params": params, "epoch": int(blob["epoch"]), "rng": blob.get("rng") or {}, "extra": blob.get("extra") or {}}
