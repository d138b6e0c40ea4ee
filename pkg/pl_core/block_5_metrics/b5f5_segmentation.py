# Folder: platter/pl_core/block_5_metrics
# File:   b5f5_segmentation.py

from __future__ import annotations

from typing import Sequence

import numpy as np
from scipy import ndimage

from pl_core.block_1_data.b1f0_dataset import color_to_unit
from pl_core.errors import DataError

__all__ = ["b5f5_segment_generated", "b5f5_iou", "DEFAULT_SEGMENT_TOL"]

# max-channel distance from the background in [-1, 1] units
DEFAULT_SEGMENT_TOL = 0.2

_EIGHT = np.ones((3, 3), dtype=bool)


def b5f5_segment_generated(image: np.ndarray, background_color: Sequence[int] = (0, 0, 0), tol: float = DEFAULT_SEGMENT_TOL) -> np.ndarray:
    """
    B5F5 — Metrics.SegmentGenerated
    Foreground = pixels farther than tol from the background colour (max over channels), reduced to the
    largest 8-connected component with holes filled. Returns an (H,W) uint8 0/1 mask, possibly empty.
    """
    img = np.asarray(image, dtype=np.float64)
    if img.ndim != 3 or img.shape[-1] != 3:
        raise DataError(f"expected an (H,W,3) image, got {img.shape}")
    bg = color_to_unit(background_color).astype(np.float64)
    fg = np.abs(img - bg[None, None, :]).max(axis=-1) > tol
    labels, n = ndimage.label(fg, structure=_EIGHT)
    if n == 0:
        return np.zeros(fg.shape, dtype=np.uint8)
    sizes = np.bincount(labels.ravel())[1:]
    largest = labels == (int(np.argmax(sizes)) + 1)
    return ndimage.binary_fill_holes(largest).astype(np.uint8)


def b5f5_iou(a: np.ndarray, b: np.ndarray) -> float:
    """
    B5F5 — Metrics.IoU
    |a ∧ b| / |a ∨ b|; two empty masks score 1.0.
    """
    ma, mb = np.asarray(a).astype(bool), np.asarray(b).astype(bool)
    if ma.shape != mb.shape:
        raise DataError(f"mask dims differ: {ma.shape} vs {mb.shape}")
    union = int(np.count_nonzero(ma | mb))
    if union == 0:
        return 1.0
    return int(np.count_nonzero(ma & mb)) / union
