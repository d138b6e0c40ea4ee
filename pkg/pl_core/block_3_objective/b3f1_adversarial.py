# Folder: platter/pl_core/block_3_objective
# File:   b3f1_adversarial.py

from __future__ import annotations

import torch
import torch.nn.functional as F

from pl_core.block_3_objective.b3f0_loss_config import GeneratorLossVariant
from pl_core.errors import DataError, NumericError

__all__ = ["b3f1_d_adv_loss", "b3f1_g_adv_loss", "check_finite"]


def check_finite(name: str, t: torch.Tensor) -> None:
    if t.numel() == 0:
        raise DataError(f"{name} is empty")
    if not bool(torch.isfinite(t).all()):
        bad = int((~torch.isfinite(t)).sum())
        raise NumericError(f"{name} has {bad} non-finite value(s)", {"tensor": name, "non_finite": bad})


def b3f1_d_adv_loss(real_logits: torch.Tensor, fake_logits: torch.Tensor) -> torch.Tensor:
    """
    B3F1 — Objective.DiscriminatorAdversarial
    -( mean log σ(real) + mean log(1 − σ(fake)) ), via log σ(x) = −softplus(−x) and
    log(1 − σ(x)) = −softplus(x).
    """
    check_finite("real_logits", real_logits)
    check_finite("fake_logits", fake_logits)
    return F.softplus(-real_logits).mean() + F.softplus(fake_logits).mean()


def b3f1_g_adv_loss(fake_logits: torch.Tensor, variant: GeneratorLossVariant = "non_saturating") -> torch.Tensor:
    """
    B3F1 — Objective.GeneratorAdversarial
    minimax:         mean log(1 − σ(fake))  = −mean softplus(fake)
    non_saturating: −mean log σ(fake)       =  mean softplus(−fake)
    """
    check_finite("fake_logits", fake_logits)
    if variant == "minimax":
        return -F.softplus(fake_logits).mean()
    if variant == "non_saturating":
        return F.softplus(-fake_logits).mean()
    raise ValueError(f"unknown generator loss variant: {variant}")
