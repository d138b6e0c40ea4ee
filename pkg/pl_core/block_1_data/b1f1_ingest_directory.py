# Folder: platter/pl_core/block_1_data
# File:   b1f1_ingest_directory.py

from __future__ import annotations

import json
import logging
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from PIL import Image, UnidentifiedImageError

from pl_core.block_1_data.b1f0_dataset import (
    DatasetItem,
    ImageDataset,
    resize_image,
    resize_labels,
    to_unit_range,
)

__all__ = ["b1f1_ingest_directory", "MANIFEST_NAME", "IMAGE_SUFFIXES"]

log = logging.getLogger(__name__)

MANIFEST_NAME = "manifest.json"
IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg"}


def _is_image(p: Path) -> bool:
    return p.is_file() and p.suffix.lower() in IMAGE_SUFFIXES


def _read_manifest(root: Path) -> Dict[str, Any]:
    mf = root / MANIFEST_NAME
    if not mf.is_file():
        return {}
    try:
        data = json.loads(mf.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        log.warning("ignoring unreadable manifest %s: %s", mf, e)
        return {}
    return data if isinstance(data, dict) else {}


def _layout(root: Path, mask_subdir: Optional[str], manifest: Dict[str, Any]) -> Tuple[List[str], List[Tuple[Path, Optional[int]]]]:
    """Category names (manifest order, else sorted subdirectories) and the (file, category) list."""
    skip = {mask_subdir} if mask_subdir else set()
    subdirs = sorted(d.name for d in root.iterdir() if d.is_dir() and d.name not in skip)
    names = manifest.get("categories")
    if isinstance(names, list) and all(isinstance(n, str) for n in names) and names:
        categories = list(names)
    else:
        categories = subdirs

    files: List[Tuple[Path, Optional[int]]] = []
    if categories:
        for cid, name in enumerate(categories):
            cdir = root / name
            if not cdir.is_dir():
                continue
            files.extend((p, cid) for p in sorted(cdir.iterdir()) if _is_image(p))
    else:
        files.extend((p, None) for p in sorted(root.iterdir()) if _is_image(p))
    return categories, files


def _mask_path(root: Path, mask_subdir: str, img_path: Path) -> Optional[Path]:
    rel_parent = img_path.parent.relative_to(root)
    mdir = root / mask_subdir / rel_parent
    for suffix in (".png", img_path.suffix):
        cand = mdir / (img_path.stem + suffix)
        if cand.is_file():
            return cand
    return None


def _decode_rgb(p: Path) -> np.ndarray:
    with Image.open(p) as im:
        return np.asarray(im.convert("RGB"))


def _decode_mask(p: Path) -> np.ndarray:
    with Image.open(p) as im:
        return np.asarray(im.convert("L"))


def b1f1_ingest_directory(path: str | Path, target_size: int, mask_subdir: Optional[str] = None) -> Dict[str, Any]:
    """
    B1F1 — Data.IngestDirectory
    Layout:
      <path>/<category>/<name>.(png|jpg)            one subdirectory per category
      <path>/<mask_subdir>/<category>/<name>.png    optional single-channel label masks (0 = background, k = item k)
      <path>/manifest.json                          optional {"categories": [...], "background_color": [r,g,b]}
    Images without category subdirectories are loaded unlabelled.
    Output:
      {
        "status": "OK|FAIL",
        "dataset": ImageDataset,          # only on OK
        "diag": {"reason": "ok|not_a_directory|no_images", "errors": [{file, reason}], "loaded": int}
      }
    """
    root = Path(path)
    if not root.is_dir():
        return {"status": "FAIL", "diag": {"reason": "not_a_directory", "message": f"not a directory: {root}", "errors": []}}

    manifest = _read_manifest(root)
    categories, files = _layout(root, mask_subdir, manifest)
    errors: List[Dict[str, Any]] = []
    items: List[DatasetItem] = []

    for img_path, cid in files:
        rel = str(img_path.relative_to(root))
        try:
            raw = _decode_rgb(img_path)
        except (UnidentifiedImageError, OSError, ValueError) as e:
            errors.append({"file": rel, "reason": "undecodable", "detail": f"{e.__class__.__name__}: {e}"})
            continue

        labels = None
        if mask_subdir:
            mp = _mask_path(root, mask_subdir, img_path)
            if mp is not None:
                try:
                    raw_mask = _decode_mask(mp)
                except (UnidentifiedImageError, OSError, ValueError) as e:
                    errors.append({"file": rel, "reason": "undecodable_mask", "detail": f"{e.__class__.__name__}: {e}"})
                    continue
                if raw_mask.shape != raw.shape[:2]:
                    errors.append({
                        "file": rel,
                        "reason": "mask_dim_mismatch",
                        "detail": f"image {raw.shape[:2]} vs mask {raw_mask.shape}",
                    })
                    continue
                labels = resize_labels(raw_mask, target_size)

        image = resize_image(to_unit_range(raw), target_size)
        items.append(DatasetItem(name=rel, image=image, labels=labels, category=cid))

    if errors:
        log.warning("ingest %s: %d file(s) skipped", root, len(errors))

    if not items:
        return {
            "status": "FAIL",
            "diag": {"reason": "no_images", "message": f"no images found in {root}", "errors": errors, "loaded": 0},
        }

    bg = manifest.get("background_color")
    dataset = ImageDataset(
        items=tuple(items),
        num_categories=len(categories) if categories else None,
        category_names=tuple(categories),
        background_color=tuple(int(v) for v in bg) if isinstance(bg, list) and len(bg) == 3 else None,
    )
    log.info("ingested %d image(s) from %s (K=%s)", dataset.size, root, dataset.num_categories)
    return {"status": "OK", "dataset": dataset, "diag": {"reason": "ok", "errors": errors, "loaded": dataset.size}}
