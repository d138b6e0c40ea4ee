# Folder: platter/pl_core/block_1_data
# File:   b1f2_extract_masked_items.py

from __future__ import annotations

import logging
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from pl_core.block_1_data.b1f0_dataset import (
    DatasetItem,
    ImageDataset,
    color_to_unit,
    resize_image,
    resize_mask,
)

__all__ = ["b1f2_split_label_map", "b1f2_extract_masked_items", "b1f2_extract_dataset_items", "mask_bbox"]

log = logging.getLogger(__name__)

DEFAULT_BACKGROUND = (0, 0, 0)


def mask_bbox(mask: np.ndarray) -> Optional[Tuple[int, int, int, int]]:
    """Tight (row0, row1, col0, col1) bounds, inclusive. None for an empty mask."""
    rows = np.flatnonzero(np.any(mask, axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(np.any(mask, axis=0))
    return int(rows[0]), int(rows[-1]), int(cols[0]), int(cols[-1])


def b1f2_split_label_map(label_map: np.ndarray) -> Dict[int, np.ndarray]:
    """Single-channel label raster (0 = background, k = item k) -> {k: binary mask}."""
    lm = np.asarray(label_map)
    if lm.ndim == 3:
        lm = lm[..., 0]
    return {int(k): (lm == k).astype(np.uint8) for k in np.unique(lm) if k != 0}


def b1f2_extract_masked_items(
    image: np.ndarray,
    masks: Mapping[int, np.ndarray],
    target_size: Optional[int] = None,
    background_color: Sequence[int] = DEFAULT_BACKGROUND,
) -> Dict[str, Any]:
    """
    B1F2 — Data.ExtractMaskedItems
    For each labelled region: crop the tight bounding box, paint pixels outside the mask with the
    background colour and resize the crop (bilinear) and its mask (nearest + 0.5 threshold) to
    target_size × target_size (default: the input height).
    Output:
      {
        "status": "OK|SKIP",
        "items": [{"label": int, "image": H×W×3, "mask": H×W, "bbox": (r0, r1, c0, c1)}],
        "diag": {"reason": "ok|no_items", "warnings": [{label, reason}]}
      }
    """
    img = np.asarray(image, dtype=np.float32)
    size = int(target_size or img.shape[0])
    bg = color_to_unit(background_color)
    out: List[Dict[str, Any]] = []
    warnings: List[Dict[str, Any]] = []

    for label in sorted(masks):
        m = np.asarray(masks[label]) > 0
        if m.shape != img.shape[:2]:
            warnings.append({"label": int(label), "reason": "mask_dim_mismatch"})
            continue
        bbox = mask_bbox(m)
        if bbox is None:
            warnings.append({"label": int(label), "reason": "empty_mask"})
            continue
        r0, r1, c0, c1 = bbox
        crop = img[r0:r1 + 1, c0:c1 + 1].copy()
        crop_mask = m[r0:r1 + 1, c0:c1 + 1]
        crop[~crop_mask] = bg
        out.append({
            "label": int(label),
            "image": resize_image(crop, size),
            "mask": resize_mask(crop_mask.astype(np.float32), size),
            "bbox": bbox,
        })

    for w in warnings:
        log.warning("masked item skipped: label=%s reason=%s", w["label"], w["reason"])

    if not out:
        return {"status": "SKIP", "items": [], "diag": {"reason": "no_items", "warnings": warnings}}
    return {"status": "OK", "items": out, "diag": {"reason": "ok", "warnings": warnings}}


def b1f2_extract_dataset_items(dataset: ImageDataset, background_color: Optional[Sequence[int]] = None) -> Dict[str, Any]:
    """
    Food-only rendition of a masked dataset: one extracted item per labelled region, category kept.
    Items with a label raster are split per label; a binary mask yields a single item. Items cut from
    a multi-item image are named <stem>_<label>.
    """
    bg = tuple(background_color or dataset.background_color or DEFAULT_BACKGROUND)
    items: List[DatasetItem] = []
    warnings: List[Dict[str, Any]] = []
    for it in dataset.items:
        if it.mask is None:
            warnings.append({"item": it.name, "reason": "no_mask"})
            continue
        parts = b1f2_split_label_map(it.labels) if it.labels is not None else {1: it.mask}
        res = b1f2_extract_masked_items(it.image, parts, it.shape[0], bg)
        split = len(res["items"]) > 1
        for w in res["diag"]["warnings"]:
            warnings.append({"item": it.name, **w})
        for extracted in res["items"]:
            items.append(DatasetItem(
                name=f"{Path(it.name).with_suffix('')}_{extracted['label']}" if split else it.name,
                image=extracted["image"],
                mask=extracted["mask"],
                category=it.category,
                meta={**it.meta, "bbox": list(extracted["bbox"]), "label": extracted["label"]},
            ))
    if not items:
        return {"status": "FAIL", "diag": {"reason": "no_items", "warnings": warnings}}
    ds = ImageDataset(
        items=tuple(items),
        num_categories=dataset.num_categories,
        category_names=dataset.category_names,
        background_color=bg,
    )
    return {"status": "OK", "dataset": ds, "diag": {"reason": "ok", "warnings": warnings}}
