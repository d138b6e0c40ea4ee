# Folder: platter/pl_api/schemas
# File:   schemas.py

from __future__ import annotations

from typing import Any, Dict, Literal, Optional

from pydantic import BaseModel, Field


class GenerateRequest(BaseModel):
    checkpoint: str
    inputs: str
    styles_per_input: int = Field(8, ge=1)
    category: Optional[int] = None
    seed: Optional[int] = None
    sweep: bool = False
    limit: Optional[int] = Field(None, ge=1)
    output_dir: Optional[str] = None


class EvaluateRequest(BaseModel):
    mode: Literal["fid", "per-category-fid", "iou"]
    generated: str
    reference: str
    extractor: str = "desk"
    seed: Optional[int] = None
    num_samples: Optional[int] = Field(None, ge=1)
    shape_dir: Optional[str] = None
    styles_per_input: int = Field(8, ge=1)
    num_inputs: int = Field(5, ge=1)
    category: Optional[int] = None
    image_size: Optional[int] = None
    classifier_epochs: int = Field(8, ge=1)
    output_dir: Optional[str] = None


class RunResponse(BaseModel):
    ok: bool = True
    run_id: str
    output_dir: str
    manifest_path: str
    outputs: Dict[str, Any] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
