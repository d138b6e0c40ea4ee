# Folder: platter/pl_core/block_3_objective
# File:   b3f4_total.py

from __future__ import annotations

from typing import Union

import torch

from pl_core.block_3_objective.b3f0_loss_config import LossConfig
from pl_core.errors import NumericError

__all__ = ["b3f4_eg_total"]

Scalar = Union[float, torch.Tensor]


def _finite(x: Scalar) -> bool:
    if isinstance(x, torch.Tensor):
        return bool(torch.isfinite(x).all())
    return x == x and abs(x) != float("inf")


def b3f4_eg_total(adv: Scalar, recon: Scalar, cfg: LossConfig) -> Scalar:
    """B3F4 — Objective.EGTotal: adv + λ·recon, the encoder/generator descent objective."""
    if not (_finite(adv) and _finite(recon)):
        raise NumericError("non-finite loss term", {"adv": float(adv), "recon": float(recon)})
    return adv + cfg.lambda_recon * recon
