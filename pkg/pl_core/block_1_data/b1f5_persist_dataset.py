# Folder: platter/pl_core/block_1_data
# File:   b1f5_persist_dataset.py

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, Optional

import numpy as np
from PIL import Image

from pl_core.block_1_data.b1f0_dataset import ImageDataset, to_uint8
from pl_core.block_1_data.b1f1_ingest_directory import MANIFEST_NAME

__all__ = ["b1f5_save_dataset", "MASK_SUBDIR"]

log = logging.getLogger(__name__)

MASK_SUBDIR = "masks"


def _category_dir(dataset: ImageDataset, category: Optional[int]) -> str:
    if category is None:
        # unlabelled items sit at the root so ingest does not read a category
        return ""
    if dataset.category_names:
        return dataset.category_names[category]
    return f"c{category:02d}"


def b1f5_save_dataset(dataset: ImageDataset, path: str | Path, extra_manifest: Optional[Dict[str, Any]] = None) -> Dict[str, Any]:
    """
    B1F5 — Data.SaveDataset
    Writes the directory layout read back by B1F1:
      <path>/<category>/<name>.png, <path>/masks/<category>/<name>.png, <path>/manifest.json
    Unlabelled items go directly under <path> (and <path>/masks).
    Output: {"status": "OK", "path": str, "files": int, "diag": {"reason": "ok"}}
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = list(dataset.category_names) if dataset.category_names else (
        [f"c{k:02d}" for k in range(dataset.num_categories)] if dataset.num_categories else []
    )
    for name in names:
        (root / name).mkdir(exist_ok=True)

    written = 0
    for it in dataset.items:
        sub = _category_dir(dataset, it.category)
        stem = Path(it.name).stem
        (root / sub).mkdir(exist_ok=True)
        Image.fromarray(to_uint8(it.image)).save(root / sub / f"{stem}.png")
        written += 1
        if it.mask is not None:
            mdir = root / MASK_SUBDIR / sub
            mdir.mkdir(parents=True, exist_ok=True)
            raster = it.labels if it.labels is not None else it.mask * 255
            Image.fromarray(np.asarray(raster, dtype=np.uint8)).save(mdir / f"{stem}.png")

    manifest = {
        "categories": names,
        "background_color": list(dataset.background_color) if dataset.background_color else None,
        "size": dataset.size,
        "image_size": list(dataset.image_shape) if dataset.image_shape else None,
        "has_masks": dataset.has_masks,
    }
    manifest.update(extra_manifest or {})
    (root / MANIFEST_NAME).write_text(json.dumps(manifest, ensure_ascii=False, indent=2, sort_keys=True), encoding="utf-8")
    log.info("saved %d image(s) to %s", written, root)
    return {"status": "OK", "path": str(root), "files": written, "diag": {"reason": "ok"}}
