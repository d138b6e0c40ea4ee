# Folder: platter/pl_core/block_5_metrics
# File:   b5f6_shape_report.py

from __future__ import annotations

import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
import torch
from pydantic import BaseModel, Field, model_validator

from pl_core.block_1_data.b1f0_dataset import DatasetItem, ImageDataset
from pl_core.block_2_model.b2f2_init_params import ModelParams, make_generator, one_hot, sample_categories, sample_latent
from pl_core.block_2_model.b2f3_forward import b2f3_encode, b2f3_generate, images_to_tensor, tensor_to_images
from pl_core.block_5_metrics.b5f5_segmentation import DEFAULT_SEGMENT_TOL, b5f5_iou, b5f5_segment_generated
from pl_core.errors import ConfigError, DataError

__all__ = [
    "IoURow",
    "IoUReport",
    "b5f6_generate_styles",
    "b5f6_sweep_categories",
    "b5f6_generate_samples",
    "b5f6_shape_preservation_report",
]

log = logging.getLogger(__name__)

GENERATE_BATCH = 64


class IoURow(BaseModel):
    input_id: str
    style_index: int = Field(ge=0)
    iou: float = Field(ge=0.0, le=1.0)


class IoUReport(BaseModel):
    rows: List[IoURow]
    mean_iou: float
    min_iou: float

    @model_validator(mode="after")
    def _consistent(self) -> "IoUReport":
        if not self.rows:
            raise ValueError("an IoU report needs at least one row")
        vals = [r.iou for r in self.rows]
        if abs(self.mean_iou - float(np.mean(vals))) > 1e-9 or abs(self.min_iou - min(vals)) > 1e-12:
            raise ValueError("mean_iou/min_iou disagree with rows")
        return self

    @classmethod
    def from_rows(cls, rows: List[IoURow]) -> "IoUReport":
        vals = [r.iou for r in rows]
        return cls(rows=rows, mean_iou=float(np.mean(vals)) if vals else 0.0, min_iou=min(vals) if vals else 0.0)


def _category_tensor(params: ModelParams, n: int, category: Optional[int], gen: torch.Generator) -> Optional[torch.Tensor]:
    k = params.config.num_categories
    if category is not None:
        if k is None:
            raise ConfigError("category requested from a model built without categories")
        if not 0 <= int(category) < k:
            raise ConfigError(f"category {category} outside [0, {k})")
        return one_hot([int(category)] * n, k)
    if k is None:
        return None
    return one_hot(sample_categories(n, k, gen), k)


@torch.no_grad()
def b5f6_generate_styles(
    params: ModelParams,
    images: np.ndarray,
    styles_per_input: int,
    seed: int,
    category: Optional[int] = None,
) -> np.ndarray:
    """
    B5F6 — Metrics.GenerateStyles
    (N,H,W,3) shape inputs -> (N,S,H,W,3) outputs. Column s uses the same seeded z for every input;
    c is fixed when `category` is given, drawn per style from the same generator for conditional
    models otherwise, and Absent for unconditional ones.
    """
    if styles_per_input < 1:
        raise ConfigError("styles_per_input must be >= 1")
    arr = np.asarray(images, dtype=np.float32)
    if arr.ndim == 3:
        arr = arr[None]
    gen = make_generator(seed)
    z = sample_latent(styles_per_input, params.config.latent_dim, gen).to(params.device, params.dtype)
    c = _category_tensor(params, styles_per_input, category, gen)
    out = np.empty((len(arr), styles_per_input) + arr.shape[1:], dtype=np.float32)
    for i, img in enumerate(arr):
        f = b2f3_encode(params, images_to_tensor(img, params))
        y = b2f3_generate(params, f.expand(styles_per_input, -1, -1, -1), z, c)
        out[i] = tensor_to_images(y)
    return out


@torch.no_grad()
def b5f6_sweep_categories(params: ModelParams, image: np.ndarray, z: torch.Tensor, categories: Sequence[int]) -> np.ndarray:
    """Fixed (input, z), one output per requested category: (len(categories),H,W,3)."""
    k = params.config.num_categories
    if k is None:
        raise ConfigError("category sweep needs a model built with categories")
    cats = list(categories)
    zz = torch.as_tensor(z).reshape(1, -1).to(params.device, params.dtype).expand(len(cats), -1)
    f = b2f3_encode(params, images_to_tensor(image, params)).expand(len(cats), -1, -1, -1)
    return tensor_to_images(b2f3_generate(params, f, zz, one_hot(cats, k)))


@torch.no_grad()
def b5f6_generate_samples(
    params: ModelParams,
    shape_set: ImageDataset,
    n: int,
    seed: int,
    category: Optional[int] = None,
) -> ImageDataset:
    """
    B5F6 — Metrics.GenerateSamples
    n generated images, one per sampled shape input (with replacement only when n exceeds the set).
    Items carry the category that conditioned them, if any.
    """
    if shape_set.size == 0:
        raise DataError("no shape inputs to generate from")
    rng = np.random.default_rng(seed)
    ix = rng.choice(shape_set.size, size=n, replace=n > shape_set.size)
    gen = make_generator(seed)
    k = params.config.num_categories
    items: List[DatasetItem] = []
    for start in range(0, n, GENERATE_BATCH):
        sel = [int(i) for i in ix[start:start + GENERATE_BATCH]]
        b = len(sel)
        z = sample_latent(b, params.config.latent_dim, gen).to(params.device, params.dtype)
        c = _category_tensor(params, b, category, gen)
        f = b2f3_encode(params, images_to_tensor(shape_set.images(sel), params))
        y = tensor_to_images(b2f3_generate(params, f, z, c))
        cats = c.argmax(dim=1).tolist() if c is not None else [None] * b
        for j in range(b):
            items.append(DatasetItem(name=f"gen{start + j:05d}", image=np.clip(y[j], -1.0, 1.0), category=cats[j]))
    return ImageDataset(
        items=tuple(items),
        num_categories=k,
        category_names=shape_set.category_names if k is not None and len(shape_set.category_names) == k else (),
    )


def b5f6_shape_preservation_report(
    inputs: Sequence[Tuple[np.ndarray, np.ndarray]],
    params: ModelParams,
    styles_per_input: int,
    seed: int,
    background_color: Sequence[int] = (0, 0, 0),
    tol: float = DEFAULT_SEGMENT_TOL,
    category: Optional[int] = None,
    input_ids: Optional[Sequence[str]] = None,
) -> IoUReport:
    """
    B5F6 — Metrics.ShapePreservationReport
    For every (image, mask) input: styles_per_input generations, each segmented against the known
    background and scored by IoU with the input mask.
    """
    if not inputs:
        raise DataError("shape preservation report needs at least one input")
    ids = list(input_ids) if input_ids is not None else [f"{i:03d}" for i in range(len(inputs))]
    if len(ids) != len(inputs):
        raise DataError("input_ids and inputs differ in length")
    images = np.stack([np.asarray(img, dtype=np.float32) for img, _ in inputs])
    outs = b5f6_generate_styles(params, images, styles_per_input, seed, category)

    rows: List[IoURow] = []
    for (_, mask), iid, styles in zip(inputs, ids, outs):
        for s, y in enumerate(styles):
            seg = b5f5_segment_generated(y, background_color, tol)
            rows.append(IoURow(input_id=iid, style_index=s, iou=b5f5_iou(seg, mask)))
    report = IoUReport.from_rows(rows)
    log.info("shape preservation: %d inputs × %d styles, mean IoU %.3f, min %.3f", len(inputs), styles_per_input, report.mean_iou, report.min_iou)
    return report
