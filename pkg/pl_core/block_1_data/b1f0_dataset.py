# Folder: platter/pl_core/block_1_data
# File:   b1f0_dataset.py

from __future__ import annotations

from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
import torch
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__ = [
    "DatasetItem",
    "ImageDataset",
    "RGB",
    "SIZE_MULTIPLE",
    "color_to_unit",
    "to_unit_range",
    "to_uint8",
    "resize_image",
    "resize_mask",
    "resize_labels",
    "check_image_size",
]

RGB = Tuple[int, int, int]

# encoder halves five times at most; every supported raster side is a multiple of this
SIZE_MULTIPLE = 32

_BOUND_EPS = 1e-6


# ------------------------- pixel conversions -------------------------

def to_unit_range(pixels: np.ndarray) -> np.ndarray:
    """uint8 0..255 -> float32 in [-1, 1]. The only place raw pixels enter the toolkit."""
    arr = np.asarray(pixels, dtype=np.float32)
    return np.clip(arr / 127.5 - 1.0, -1.0, 1.0)


def to_uint8(image: np.ndarray) -> np.ndarray:
    arr = (np.asarray(image, dtype=np.float64) + 1.0) * 127.5
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def color_to_unit(rgb: Sequence[int]) -> np.ndarray:
    return to_unit_range(np.asarray(rgb, dtype=np.float32).reshape(3))


def check_image_size(size: int) -> bool:
    return isinstance(size, int) and size >= SIZE_MULTIPLE and size % SIZE_MULTIPLE == 0


def resize_image(image: np.ndarray, height: int, width: Optional[int] = None) -> np.ndarray:
    """Bilinear resize of an H×W×3 float image. Bilinear weights are convex, so bounds hold."""
    width = height if width is None else width
    arr = np.asarray(image, dtype=np.float32)
    if arr.shape[:2] == (height, width):
        return arr.copy()
    t = torch.from_numpy(np.ascontiguousarray(arr.transpose(2, 0, 1)))[None]
    out = F.interpolate(t, size=(height, width), mode="bilinear", align_corners=False)
    return np.clip(out[0].numpy().transpose(1, 2, 0), -1.0, 1.0).astype(np.float32)


def resize_mask(mask: np.ndarray, height: int, width: Optional[int] = None) -> np.ndarray:
    """Nearest-neighbour resize followed by a 0.5 re-threshold."""
    width = height if width is None else width
    arr = np.asarray(mask, dtype=np.float32)
    if arr.shape[:2] != (height, width):
        t = torch.from_numpy(np.ascontiguousarray(arr))[None, None]
        arr = F.interpolate(t, size=(height, width), mode="nearest")[0, 0].numpy()
    return (arr >= 0.5).astype(np.uint8)


def resize_labels(labels: np.ndarray, height: int, width: Optional[int] = None) -> np.ndarray:
    """Nearest-neighbour resize of an integer label raster; label values pass through unchanged."""
    width = height if width is None else width
    arr = np.asarray(labels)
    if arr.shape[:2] != (height, width):
        t = torch.from_numpy(np.ascontiguousarray(arr.astype(np.float32)))[None, None]
        arr = F.interpolate(t, size=(height, width), mode="nearest")[0, 0].numpy()
    return np.rint(arr).astype(np.uint8)


def _frozen(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, copy=True)
    out.setflags(write=False)
    return out


# ------------------------- types -------------------------

class DatasetItem(BaseModel):
    """One raster with its optional mask and category id.

    `labels` keeps the per-item label raster (0 = background, k = item k) when the source mask had
    one; `mask` is always its binary union.
    """

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    name: str
    image: np.ndarray
    mask: Optional[np.ndarray] = None
    labels: Optional[np.ndarray] = None
    category: Optional[int] = None
    meta: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_arrays(self) -> "DatasetItem":
        img = np.asarray(self.image, dtype=np.float32)
        if img.ndim != 3 or img.shape[2] != 3:
            raise ValueError(f"image must be H×W×3, got shape {img.shape}")
        if not np.all(np.isfinite(img)):
            raise ValueError("image contains non-finite values")
        if img.size and (img.min() < -1.0 - _BOUND_EPS or img.max() > 1.0 + _BOUND_EPS):
            raise ValueError("image values outside [-1, 1]")
        object.__setattr__(self, "image", _frozen(np.clip(img, -1.0, 1.0)))
        if self.labels is not None:
            lm = np.asarray(self.labels)
            if lm.shape != img.shape[:2]:
                raise ValueError(f"label raster shape {lm.shape} does not match image {img.shape[:2]}")
            if lm.size and (lm.min() < 0 or lm.max() > 255 or not np.all(lm == np.rint(lm))):
                raise ValueError("label values must be integers in [0, 255]")
            lm = lm.astype(np.uint8)
            union = (lm > 0).astype(np.uint8)
            if self.mask is None:
                object.__setattr__(self, "mask", union)
            elif not np.array_equal(np.asarray(self.mask) > 0, union > 0):
                raise ValueError("mask must equal the union of the labelled regions")
            object.__setattr__(self, "labels", _frozen(lm))
        if self.mask is not None:
            m = np.asarray(self.mask)
            if m.shape != img.shape[:2]:
                raise ValueError(f"mask shape {m.shape} does not match image {img.shape[:2]}")
            if not np.all((m == 0) | (m == 1)):
                raise ValueError("mask values must be exactly 0 or 1")
            object.__setattr__(self, "mask", _frozen(m.astype(np.uint8)))
        if self.category is not None and self.category < 0:
            raise ValueError("category id must be non-negative")
        return self

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.image.shape[0]), int(self.image.shape[1])


class ImageDataset(BaseModel):
    """Ordered, immutable collection of equally sized images."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    items: Tuple[DatasetItem, ...] = ()
    num_categories: Optional[int] = None
    category_names: Tuple[str, ...] = ()
    background_color: Optional[RGB] = None

    @model_validator(mode="after")
    def _check_items(self) -> "ImageDataset":
        shapes = {it.shape for it in self.items}
        if len(shapes) > 1:
            raise ValueError(f"images do not share one size: {sorted(shapes)}")
        k = self.num_categories
        if k is not None and k < 1:
            raise ValueError("num_categories must be >= 1 when present")
        for it in self.items:
            if it.category is None:
                continue
            if k is None:
                raise ValueError(f"item {it.name} has a category but the dataset has no num_categories")
            if not 0 <= it.category < k:
                raise ValueError(f"item {it.name} category {it.category} outside [0, {k})")
        if self.category_names and k is not None and len(self.category_names) != k:
            raise ValueError("category_names length must equal num_categories")
        return self

    # ---- views ----

    @property
    def size(self) -> int:
        return len(self.items)

    def __len__(self) -> int:
        return len(self.items)

    @property
    def image_shape(self) -> Optional[Tuple[int, int]]:
        return self.items[0].shape if self.items else None

    @property
    def has_masks(self) -> bool:
        return bool(self.items) and all(it.mask is not None for it in self.items)

    @property
    def is_labelled(self) -> bool:
        return bool(self.items) and self.num_categories is not None and all(
            it.category is not None for it in self.items
        )

    def _pick(self, indices: Optional[Iterable[int]]) -> List[DatasetItem]:
        if indices is None:
            return list(self.items)
        return [self.items[int(i)] for i in indices]

    def images(self, indices: Optional[Iterable[int]] = None) -> np.ndarray:
        picked = self._pick(indices)
        if not picked:
            return np.zeros((0, 0, 0, 3), dtype=np.float32)
        return np.stack([it.image for it in picked]).astype(np.float32)

    def masks(self, indices: Optional[Iterable[int]] = None) -> np.ndarray:
        picked = self._pick(indices)
        if any(it.mask is None for it in picked):
            raise ValueError("some items carry no mask")
        return np.stack([it.mask for it in picked]) if picked else np.zeros((0, 0, 0), dtype=np.uint8)

    def categories(self, indices: Optional[Iterable[int]] = None) -> Optional[np.ndarray]:
        picked = self._pick(indices)
        if not picked or any(it.category is None for it in picked):
            return None
        return np.asarray([it.category for it in picked], dtype=np.int64)

    def subset(self, indices: Iterable[int]) -> "ImageDataset":
        return self.model_copy(update={"items": tuple(self._pick(indices))})

    def by_category(self) -> Dict[int, "ImageDataset"]:
        groups: Dict[int, List[int]] = {}
        for idx, it in enumerate(self.items):
            if it.category is not None:
                groups.setdefault(it.category, []).append(idx)
        return {c: self.subset(ix) for c, ix in sorted(groups.items())}
