# Folder: platter/pl_core/block_5_metrics
# File:   b5f7_reports.py

from __future__ import annotations

import csv
import os
from pathlib import Path
from typing import Any, Dict, List, Sequence

import numpy as np
from PIL import Image

from pl_core.block_1_data.b1f0_dataset import to_uint8
from pl_core.block_5_metrics.b5f6_shape_report import IoUReport
from pl_core.errors import DataError

__all__ = ["write_csv_report", "iou_report_rows", "fid_report_rows", "render_grid", "save_png", "IOU_FIELDS", "FID_FIELDS", "GRID_PAD"]

IOU_FIELDS = ["input_id", "style_index", "iou"]
FID_FIELDS = ["category", "name", "n_generated", "n_reference", "fid", "warning"]
GRID_PAD = 2


def write_csv_report(path: str | Path, rows: Sequence[Dict[str, Any]], fieldnames: Sequence[str]) -> Path:
    """Writes rows (None -> empty cell) to a temp file and renames it into place."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(fieldnames), extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow({k: ("" if r.get(k) is None else r.get(k)) for k in fieldnames})
    os.replace(tmp, target)
    return target


def iou_report_rows(report: IoUReport) -> List[Dict[str, Any]]:
    """Table rows followed by the mean/min footer."""
    rows = [r.model_dump() for r in report.rows]
    rows.append({"input_id": "mean", "style_index": None, "iou": report.mean_iou})
    rows.append({"input_id": "min", "style_index": None, "iou": report.min_iou})
    return rows


def fid_report_rows(result: Dict[str, Any]) -> List[Dict[str, Any]]:
    return list(result.get("rows") or [])


def render_grid(images: np.ndarray, path: str | Path, pad: int = GRID_PAD, pad_value: int = 255) -> Path:
    """(R,C,H,W,3) images in [-1,1] -> one PNG, rows = inputs, columns = styles or categories."""
    arr = np.asarray(images)
    if arr.ndim != 5 or arr.shape[-1] != 3:
        raise DataError(f"grid expects (rows, cols, H, W, 3), got {arr.shape}")
    r, c, h, w, _ = arr.shape
    canvas = np.full((r * h + (r + 1) * pad, c * w + (c + 1) * pad, 3), pad_value, dtype=np.uint8)
    for i in range(r):
        for j in range(c):
            y0, x0 = pad + i * (h + pad), pad + j * (w + pad)
            canvas[y0:y0 + h, x0:x0 + w] = to_uint8(arr[i, j])
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(canvas).save(target, format="PNG")
    return target


def save_png(image: np.ndarray, path: str | Path, mask: bool = False) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    arr = (np.asarray(image, dtype=np.uint8) * 255) if mask else to_uint8(image)
    Image.fromarray(arr).save(target, format="PNG")
    return target
