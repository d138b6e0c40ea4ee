# Folder: platter/pl_core/block_3_objective
# File:   b3f2_reconstruction.py

from __future__ import annotations

import torch

from pl_core.errors import DataError

__all__ = ["b3f2_recon_loss"]


def b3f2_recon_loss(f_in: torch.Tensor, f_cycle: torch.Tensor) -> torch.Tensor:
    """B3F2 — Objective.Reconstruction: mean |E(I^s) − E(G(E(I^s), z, c))| over every element and the batch."""
    if f_in.shape != f_cycle.shape:
        raise DataError(f"feature shapes differ: {tuple(f_in.shape)} vs {tuple(f_cycle.shape)}")
    return (f_in - f_cycle).abs().mean()
