# Folder: platter/pl_core/block_1_data
# File:   b1f4_batch_iterator.py

from __future__ import annotations

import logging
from typing import Any, Dict, Iterator, List

import numpy as np

from pl_core.block_1_data.b1f0_dataset import ImageDataset

__all__ = ["b1f4_batch_iterator", "epoch_order", "batch_count"]

log = logging.getLogger(__name__)


def epoch_order(size: int, shuffle_seed: int, epoch: int = 0) -> np.ndarray:
    """Seeded permutation of range(size); a pure function of (size, seed, epoch)."""
    rng = np.random.default_rng([int(shuffle_seed), int(epoch)])
    return rng.permutation(size)


def batch_count(size: int, batch_size: int) -> int:
    if size == 0:
        return 0
    return -(-size // min(batch_size, size))


def b1f4_batch_iterator(dataset: ImageDataset, batch_size: int, shuffle_seed: int, epoch: int = 0) -> Iterator[Dict[str, Any]]:
    """
    B1F4 — Data.BatchIterator
    Yields one epoch of batches in seeded order, the final short batch included:
      {"indices": (B,), "images": (B,H,W,3), "masks": (B,H,W) | None, "categories": (B,) | None}
    A batch_size above the dataset size produces one full-dataset batch (with a warning).
    """
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    n = dataset.size
    if batch_size > n:
        log.warning("batch_size %d exceeds dataset size %d; emitting one full batch", batch_size, n)
        batch_size = max(1, n)

    order = epoch_order(n, shuffle_seed, epoch)
    with_masks = dataset.has_masks
    for start in range(0, n, batch_size):
        ix: List[int] = [int(i) for i in order[start:start + batch_size]]
        yield {
            "indices": np.asarray(ix, dtype=np.int64),
            "images": dataset.images(ix),
            "masks": dataset.masks(ix) if with_masks else None,
            "categories": dataset.categories(ix),
        }
