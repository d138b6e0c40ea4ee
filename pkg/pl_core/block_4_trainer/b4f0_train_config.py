# Folder: platter/pl_core/block_4_trainer
# File:   b4f0_train_config.py

from __future__ import annotations

from typing import Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from pl_core.block_3_objective.b3f0_loss_config import LossConfig

__all__ = ["TrainConfig"]


class TrainConfig(BaseModel):
    """Two-phase step schedule (1e-4 for 100 epochs, then 1e-5), batch 64, λ = 50 by default."""

    model_config = ConfigDict(frozen=True)

    epochs_total: int = Field(250, gt=0)
    lr_phase1: float = Field(1e-4, gt=0.0)
    phase1_epochs: int = Field(100, gt=0)
    lr_phase2: float = Field(1e-5, gt=0.0)
    batch_size: int = Field(64, gt=0)
    loss: LossConfig = Field(default_factory=LossConfig)
    seed: int = 0
    conditional: bool = False
    checkpoint_every: int = Field(10, gt=0)
    betas: Tuple[float, float] = (0.0, 0.99)
    # generator weight averaging is not part of the method; the field exists so configs can state it
    g_ema_decay: Optional[float] = None

    latent_dim: int = Field(128, gt=0)
    feature_channels: int = Field(128, gt=0)
    base_channels: int = Field(64, gt=0)
    max_channels: int = Field(512, gt=0)
    device: str = "cpu"
    deterministic: bool = True

    @field_validator("betas")
    @classmethod
    def _betas(cls, v: Tuple[float, float]) -> Tuple[float, float]:
        if not all(0.0 <= b < 1.0 for b in v):
            raise ValueError("adam betas must lie in [0, 1)")
        return v

    @field_validator("g_ema_decay")
    @classmethod
    def _ema(cls, v: Optional[float]) -> Optional[float]:
        if v is not None:
            raise ValueError("generator EMA is not supported; leave g_ema_decay unset")
        return v

    @model_validator(mode="after")
    def _phases(self) -> "TrainConfig":
        if self.epochs_total < self.phase1_epochs:
            raise ValueError("epochs_total must be >= phase1_epochs")
        return self

    def truncated(self, epochs: int) -> "TrainConfig":
        """Smoke/desk override: keep the schedule's shape while capping its length."""
        return self.model_copy(update={"epochs_total": epochs, "phase1_epochs": min(self.phase1_epochs, epochs)})
