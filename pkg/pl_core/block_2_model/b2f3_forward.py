# Folder: platter/pl_core/block_2_model
# File:   b2f3_forward.py

from __future__ import annotations

from typing import Any, Optional

import numpy as np
import torch

from pl_core.block_2_model.b2f1_networks import FEATURE_SIZE
from pl_core.block_2_model.b2f2_init_params import ModelParams, one_hot
from pl_core.errors import ConfigError, DataError

__all__ = [
    "b2f3_encode",
    "b2f3_generate",
    "b2f3_discriminate",
    "images_to_tensor",
    "tensor_to_images",
    "as_condition",
]


def images_to_tensor(images: np.ndarray, params: Optional[ModelParams] = None) -> torch.Tensor:
    """(B,H,W,3) or (H,W,3) float array -> (B,3,H,W) tensor on the params' device/dtype."""
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    t = torch.from_numpy(np.ascontiguousarray(arr.transpose(0, 3, 1, 2)))
    if params is not None:
        t = t.to(device=params.device, dtype=params.dtype)
    return t


def tensor_to_images(t: torch.Tensor) -> np.ndarray:
    return t.detach().to("cpu", torch.float32).numpy().transpose(0, 2, 3, 1)


def as_condition(params: ModelParams, c: Any, batch: int) -> Optional[torch.Tensor]:
    """Absent (None) or a one-hot (B,K) tensor; integer ids are expanded to one-hot."""
    k = params.config.num_categories
    if c is None:
        return None
    if k is None:
        raise ConfigError("category label given to a model built without categories")
    t = torch.as_tensor(c)
    if not t.is_floating_point():
        t = one_hot(t.reshape(-1), k)
    if t.ndim == 1:
        t = t[None]
    if t.shape[-1] != k:
        raise ConfigError(f"category vector length {t.shape[-1]} does not match K={k}")
    if t.shape[0] == 1 and batch > 1:
        t = t.expand(batch, k)
    if t.shape[0] != batch:
        raise ConfigError(f"category batch {t.shape[0]} does not match image batch {batch}")
    return t.to(device=params.device, dtype=params.dtype)


def _check_images(params: ModelParams, x: torch.Tensor) -> None:
    s = params.config.image_size
    if x.ndim != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
        raise DataError(f"expected images of shape (B,3,{s},{s}), got {tuple(x.shape)}")


def b2f3_encode(params: ModelParams, images: torch.Tensor) -> torch.Tensor:
    """B2F3 — Model.Encode: f = E(I^s), shape (B, C', 16, 16). Deterministic; differentiable."""
    _check_images(params, images)
    return params.encoder(images)


def b2f3_generate(params: ModelParams, f: torch.Tensor, z: torch.Tensor, c: Any = None) -> torch.Tensor:
    """B2F3 — Model.Generate: y = G(f, z, c) in [-1, 1] with the shape input's spatial size."""
    cfg = params.config
    if f.ndim != 4 or tuple(f.shape[1:]) != (cfg.feature_channels, FEATURE_SIZE, FEATURE_SIZE):
        raise DataError(f"expected features (B,{cfg.feature_channels},16,16), got {tuple(f.shape)}")
    if z.ndim != 2 or z.shape[0] != f.shape[0] or z.shape[1] != cfg.latent_dim:
        raise DataError(f"expected latent (B,{cfg.latent_dim}), got {tuple(z.shape)}")
    cond = as_condition(params, c, f.shape[0])
    if cfg.conditional and cond is None:
        raise ConfigError(f"model built with K={cfg.num_categories} needs a category label")
    return params.generator(f, z, cond)


def b2f3_discriminate(params: ModelParams, images: torch.Tensor, c: Any = None, update_stats: bool = False) -> torch.Tensor:
    """
    B2F3 — Model.Discriminate: one unbounded realism logit per image.
    With c present: unconditional head + <embed(c), features>; absent: the head alone.
    update_stats=True advances the spectral-norm power iteration (training only); otherwise the
    call is a pure function of (params, inputs).
    """
    _check_images(params, images)
    cond = as_condition(params, c, images.shape[0])
    disc = params.discriminator
    was_training = disc.training
    disc.train(update_stats)
    try:
        return disc(images, cond)
    finally:
        disc.train(was_training)
