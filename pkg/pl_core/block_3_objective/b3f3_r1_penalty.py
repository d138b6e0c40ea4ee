# Folder: platter/pl_core/block_3_objective
# File:   b3f3_r1_penalty.py

from __future__ import annotations

from typing import Any, Callable

import torch

from pl_core.errors import ConfigError

__all__ = ["b3f3_r1_penalty", "b3f3_r1_from_logits"]

DiscriminateFn = Callable[[torch.Tensor, Any], torch.Tensor]


def b3f3_r1_from_logits(real_logits: torch.Tensor, real_images: torch.Tensor, gamma: float) -> torch.Tensor:
    """(gamma/2) · mean_b ||∂D(x_b)/∂x_b||²; real_images must be the graph leaf the logits came from."""
    if gamma < 0:
        raise ConfigError("gamma must be >= 0")
    if not real_logits.requires_grad:
        raise ConfigError("discriminator output carries no gradient; R1 needs a differentiable discriminator")
    (grad,) = torch.autograd.grad(
        outputs=real_logits.sum(),
        inputs=real_images,
        create_graph=True,
        allow_unused=True,
    )
    if grad is None:
        # output does not depend on the pixels: a constant discriminator
        return real_logits.new_zeros(())
    sq = grad.pow(2).reshape(grad.shape[0], -1).sum(dim=1)
    return 0.5 * gamma * sq.mean()


def b3f3_r1_penalty(discriminate: DiscriminateFn, real_batch: torch.Tensor, labels: Any, gamma: float) -> torch.Tensor:
    """
    B3F3 — Objective.R1Penalty
    Gradient penalty on real data only. `discriminate(images, labels)` must return one logit per image.
    """
    x = real_batch.detach().requires_grad_(True)
    return b3f3_r1_from_logits(discriminate(x, labels), x, gamma)
