# Folder: platter/pl_core/block_4_trainer
# File:   b4f2_stage_d.py

from __future__ import annotations

import logging
from typing import Any, Dict, Optional, Tuple

import torch

from pl_core.block_2_model.b2f2_init_params import ModelParams
from pl_core.block_2_model.b2f3_forward import b2f3_discriminate, b2f3_encode, b2f3_generate
from pl_core.block_3_objective.b3f1_adversarial import b3f1_d_adv_loss
from pl_core.block_3_objective.b3f3_r1_penalty import b3f3_r1_from_logits
from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.errors import NumericError

__all__ = ["b4f2_train_step_d", "AbortGuard", "MAX_CONSECUTIVE_ABORTS"]

log = logging.getLogger(__name__)

MAX_CONSECUTIVE_ABORTS = 3


class AbortGuard:
    """Counts consecutive aborted steps; the third in a row raises."""

    def __init__(self, limit: int = MAX_CONSECUTIVE_ABORTS):
        self.limit = limit
        self.consecutive = 0
        self.diagnostics: list = []

    def ok(self) -> None:
        self.consecutive = 0

    def abort(self, stage: str, reason: str) -> None:
        self.consecutive += 1
        self.diagnostics.append({"stage": stage, "reason": reason, "consecutive": self.consecutive})
        log.warning("%s step aborted (%d/%d): %s", stage, self.consecutive, self.limit, reason)
        if self.consecutive >= self.limit:
            raise NumericError(
                f"{self.consecutive} consecutive training steps produced non-finite losses",
                {"diagnostics": self.diagnostics[-self.limit:]},
            )


def _finite(t: torch.Tensor) -> bool:
    return bool(torch.isfinite(t).all())


def b4f2_train_step_d(
    params: ModelParams,
    shape_batch: torch.Tensor,
    texture_batch: torch.Tensor,
    z_batch: torch.Tensor,
    c_batch: Any,
    cfg: TrainConfig,
    texture_labels: Any = None,
    guard: Optional[AbortGuard] = None,
) -> Tuple[ModelParams, Dict[str, Any]]:
    """
    B4F2 — Trainer.StepD
    Fakes come from E and G under no_grad; one Adam step on d_adv_loss + R1 updates D only.
    Output metrics: {"stage": "d", "status": "OK|ABORT", "d_loss", "r1", "reason"?}
    """
    if shape_batch.shape[0] != z_batch.shape[0]:
        raise ValueError("shape batch and z batch differ in size")
    params.ensure_optimizers(cfg.lr_phase1, cfg.betas)
    guard = guard or AbortGuard()
    gamma = cfg.loss.gamma_r1

    with torch.no_grad():
        fake = b2f3_generate(params, b2f3_encode(params, shape_batch), z_batch, c_batch)

    params.opt_d.zero_grad(set_to_none=True)
    real = texture_batch.detach().requires_grad_(gamma > 0)
    try:
        real_logits = b2f3_discriminate(params, real, texture_labels, update_stats=True)
        fake_logits = b2f3_discriminate(params, fake, c_batch, update_stats=True)
        d_loss = b3f1_d_adv_loss(real_logits, fake_logits)
        r1 = b3f3_r1_from_logits(real_logits, real, gamma) if gamma > 0 else d_loss.new_zeros(())
        total = d_loss + r1
        if not _finite(total):
            raise NumericError("non-finite discriminator objective")
    except NumericError as e:
        params.opt_d.zero_grad(set_to_none=True)
        guard.abort("d", e.message)
        return params, {"stage": "d", "status": "ABORT", "reason": e.message}

    total.backward()
    params.opt_d.step()
    guard.ok()
    return params, {"stage": "d", "status": "OK", "d_loss": float(d_loss.detach()), "r1": float(r1.detach())}
