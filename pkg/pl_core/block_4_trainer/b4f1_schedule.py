# Folder: platter/pl_core/block_4_trainer
# File:   b4f1_schedule.py

from __future__ import annotations

from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.errors import ConfigError

__all__ = ["b4f1_lr_at"]


def b4f1_lr_at(config: TrainConfig, epoch: int) -> float:
    """B4F1 — Trainer.LrAt: step schedule shared by both optimizers."""
    if not 0 <= epoch < config.epochs_total:
        raise ConfigError(f"epoch {epoch} outside [0, {config.epochs_total})")
    return config.lr_phase1 if epoch < config.phase1_epochs else config.lr_phase2
