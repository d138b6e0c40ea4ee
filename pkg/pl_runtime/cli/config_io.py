# Folder: platter/pl_runtime/cli
# File:   config_io.py

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Dict, List, Optional, Type, TypeVar

from pydantic import BaseModel, Field, ValidationError

from pl_core.block_4_trainer.b4f0_train_config import TrainConfig
from pl_core.errors import ConfigError

__all__ = [
    "load_json",
    "validate_model",
    "deep_merge",
    "TrainRunConfig",
    "output_root",
    "ENV_OUTPUT_ROOT",
    "ENV_DB",
    "DEFAULT_OUTPUT_ROOT",
]

ENV_OUTPUT_ROOT = "PLATTER_OUTPUT_ROOT"
ENV_DB = "PLATTER_DB"
DEFAULT_OUTPUT_ROOT = "./runs"

M = TypeVar("M", bound=BaseModel)


def output_root() -> Path:
    return Path(os.getenv(ENV_OUTPUT_ROOT, DEFAULT_OUTPUT_ROOT))


def load_json(path: Optional[str | Path]) -> Dict[str, Any]:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}", [f"--config: {p} does not exist"])
    try:
        body = json.loads(p.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigError(f"config file {p} is not valid JSON", [str(e)])
    if not isinstance(body, dict):
        raise ConfigError(f"config file {p} must hold a JSON object")
    return body


def deep_merge(base: Dict[str, Any], over: Dict[str, Any]) -> Dict[str, Any]:
    """`over` wins; nested dicts merge; None values in `over` are ignored."""
    out = dict(base)
    for k, v in over.items():
        if v is None:
            continue
        if isinstance(v, dict):
            out[k] = deep_merge(out[k] if isinstance(out.get(k), dict) else {}, v)
        else:
            out[k] = v
    return out


def _problems(e: ValidationError) -> List[str]:
    return [f"{'.'.join(map(str, err['loc'])) or '<root>'}: {err['msg']}" for err in e.errors()]


def validate_model(model: Type[M], body: Dict[str, Any], what: str) -> M:
    try:
        return model.model_validate(body)
    except ValidationError as e:
        raise ConfigError(f"invalid {what}", _problems(e))


class TrainRunConfig(BaseModel):
    """Run file for `platter train`: dataset locations plus every TrainConfig field under `train`."""

    shape_dir: Optional[str] = None
    texture_dir: Optional[str] = None
    mask_subdir: Optional[str] = None
    # None: take the size recorded in the dataset manifests
    image_size: Optional[int] = Field(None, gt=0)
    # allow an explicit image_size that differs from the manifests
    resize: bool = False
    # cut one food-only item per mask label before training
    extract_items: bool = False
    resume_from: Optional[str] = None
    train: TrainConfig = Field(default_factory=TrainConfig)

    def path_problems(self) -> List[str]:
        problems: List[str] = []
        for field in ("shape_dir", "texture_dir"):
            v = getattr(self, field)
            if not v:
                problems.append(f"{field}: required")
            elif not Path(v).is_dir():
                problems.append(f"{field}: directory does not exist: {v}")
        if self.resume_from and not Path(self.resume_from).is_file():
            problems.append(f"resume_from: checkpoint does not exist: {self.resume_from}")
        return problems
