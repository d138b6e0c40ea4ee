# Folder: platter/pl_core/block_3_objective
# File:   b3f0_loss_config.py

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel, ConfigDict, Field

__all__ = ["LossConfig", "GeneratorLossVariant"]

GeneratorLossVariant = Literal["minimax", "non_saturating"]


class LossConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    lambda_recon: float = Field(50.0, ge=0.0, description="weight of the feature reconstruction loss")
    gamma_r1: float = Field(10.0, ge=0.0, description="R1 penalty weight, applied every D step")
    generator_loss_variant: GeneratorLossVariant = "non_saturating"
    # scales the adversarial term in the E/G step; 0 isolates the reconstruction objective
    adv_weight: float = Field(1.0, ge=0.0)
