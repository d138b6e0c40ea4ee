# Folder: platter/pl_core/block_4_trainer
# File:   b4f3_stage_eg.py

from __future__ import annotations

from typing import Any, Dict, Optional, Tuple

import torch

from pl_core.block_2_model.b2f2_init_params import ModelParams
from pl_core.block_2_model.b2f3_forward import b2f3_discriminate, b2f3_encode, b2f3_generate
from pl_core.block_3_objective.b3f1_adversarial import b3f1_g_adv_loss
from pl_core.block_3_objective.b3f2_reconstruction import b3f2_recon_loss
from pl_core.block_3_objective.b3f4_total import b3f4_eg_total
from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.block_4_trainer.b4f2_stage_d import AbortGuard
from pl_core.errors import NumericError

__all__ = ["b4f3_train_step_eg"]


def b4f3_train_step_eg(
    params: ModelParams,
    shape_batch: torch.Tensor,
    z_batch: torch.Tensor,
    c_batch: Any,
    cfg: TrainConfig,
    guard: Optional[AbortGuard] = None,
) -> Tuple[ModelParams, Dict[str, Any]]:
    """
    B4F3 — Trainer.StepEG
    One Adam step for E and G on g_adv + λ·|E(I^s) − E(G(E(I^s), z, c))|₁. D is frozen (no grads,
    no spectral-norm update), so its tensors stay bitwise identical.
    Output metrics: {"stage": "eg", "status": "OK|ABORT", "g_adv", "recon", "eg_total", "reason"?}
    """
    params.ensure_optimizers(cfg.lr_phase1, cfg.betas)
    guard = guard or AbortGuard()
    disc_params = list(params.discriminator.parameters())
    flags = [p.requires_grad for p in disc_params]
    for p in disc_params:
        p.requires_grad_(False)

    params.opt_eg.zero_grad(set_to_none=True)
    try:
        f = b2f3_encode(params, shape_batch)
        y = b2f3_generate(params, f, z_batch, c_batch)
        f_cycle = b2f3_encode(params, y)
        fake_logits = b2f3_discriminate(params, y, c_batch, update_stats=False)
        g_adv = b3f1_g_adv_loss(fake_logits, cfg.loss.generator_loss_variant)
        recon = b3f2_recon_loss(f, f_cycle)
        total = b3f4_eg_total(cfg.loss.adv_weight * g_adv, recon, cfg.loss)
        if not bool(torch.isfinite(total)):
            raise NumericError("non-finite encoder/generator objective")
        total.backward()
    except NumericError as e:
        params.opt_eg.zero_grad(set_to_none=True)
        guard.abort("eg", e.message)
        return params, {"stage": "eg", "status": "ABORT", "reason": e.message}
    finally:
        for p, flag in zip(disc_params, flags):
            p.requires_grad_(flag)

    params.opt_eg.step()
    guard.ok()
    return params, {
        "stage": "eg",
        "status": "OK",
        "g_adv": float(g_adv.detach()),
        "recon": float(recon.detach()),
        "eg_total": float(total.detach()),
    }
