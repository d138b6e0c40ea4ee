# Folder: platter/pl_core/block_5_metrics
# File:   b5f4_fid.py

from __future__ import annotations

import logging
from typing import Any, Dict, List, Mapping, Optional, Sequence, Union

import numpy as np

from pl_core.block_1_data.b1f0_dataset import ImageDataset
from pl_core.block_5_metrics.b5f1_gaussian_stats import b5f1_gaussian_stats
from pl_core.block_5_metrics.b5f2_frechet import b5f2_frechet_distance
from pl_core.block_5_metrics.b5f3_extractors import FeatureExtractor
from pl_core.errors import DataError

__all__ = ["b5f4_compute_fid", "b5f4_fid_from_features", "b5f4_per_category_fid", "MIN_CATEGORY_IMAGES", "POOLED"]

log = logging.getLogger(__name__)

MIN_CATEGORY_IMAGES = 2
POOLED = "pooled"

Images = Union[ImageDataset, np.ndarray]


def _as_images(x: Images) -> np.ndarray:
    return x.images() if isinstance(x, ImageDataset) else np.asarray(x, dtype=np.float32)


def b5f4_fid_from_features(generated: np.ndarray, reference: np.ndarray, population: bool = False) -> float:
    return b5f2_frechet_distance(
        b5f1_gaussian_stats(generated, population=population),
        b5f1_gaussian_stats(reference, population=population),
    )


def b5f4_compute_fid(generated: Images, reference: Images, extractor: FeatureExtractor, population: bool = False) -> float:
    """
    B5F4 — Metrics.ComputeFID
    Fréchet distance between Gaussian fits of extractor features of the two image sets.
    """
    gen, ref = _as_images(generated), _as_images(reference)
    if len(gen) == 0 or len(ref) == 0:
        raise DataError("FID needs nonempty generated and reference sets", {"generated": len(gen), "reference": len(ref)})
    return b5f4_fid_from_features(extractor.extract(gen), extractor.extract(ref), population=population)


def b5f4_per_category_fid(
    generated: Mapping[int, Images],
    reference: Mapping[int, Images],
    extractor: FeatureExtractor,
    category_names: Optional[Sequence[str]] = None,
) -> Dict[str, Any]:
    """
    B5F4 — Metrics.PerCategoryFID
    One FID per category present on either side plus the pooled all-category FID.
    Output:
      {
        "status": "OK|FAIL",
        "rows": [{"category", "name", "n_generated", "n_reference", "fid", "warning"}],   # pooled row last
        "pooled": float | None,
        "diag": {"reason": "ok|no_categories", "skipped": [category, ...]}
      }
    """
    cats = sorted(set(generated) | set(reference))
    if not cats:
        return {"status": "FAIL", "rows": [], "pooled": None, "diag": {"reason": "no_categories", "skipped": []}}

    rows: List[Dict[str, Any]] = []
    skipped: List[int] = []
    gen_feats: List[np.ndarray] = []
    ref_feats: List[np.ndarray] = []
    for k in cats:
        gi = _as_images(generated[k]) if k in generated else np.zeros((0,))
        ri = _as_images(reference[k]) if k in reference else np.zeros((0,))
        name = category_names[k] if category_names and 0 <= k < len(category_names) else str(k)
        row: Dict[str, Any] = {"category": k, "name": name, "n_generated": len(gi), "n_reference": len(ri), "fid": None, "warning": ""}
        gf = extractor.extract(gi) if len(gi) else None
        rf = extractor.extract(ri) if len(ri) else None
        if gf is not None:
            gen_feats.append(gf)
        if rf is not None:
            ref_feats.append(rf)
        if len(gi) < MIN_CATEGORY_IMAGES or len(ri) < MIN_CATEGORY_IMAGES:
            row["warning"] = f"undersized: need >= {MIN_CATEGORY_IMAGES} images per side"
            skipped.append(k)
            log.warning("category %s skipped: %d generated / %d reference images", name, len(gi), len(ri))
        else:
            row["fid"] = b5f4_fid_from_features(gf, rf)
        rows.append(row)

    pooled: Optional[float] = None
    n_gen = sum(len(f) for f in gen_feats)
    n_ref = sum(len(f) for f in ref_feats)
    pooled_row: Dict[str, Any] = {"category": POOLED, "name": POOLED, "n_generated": n_gen, "n_reference": n_ref, "fid": None, "warning": ""}
    if n_gen >= MIN_CATEGORY_IMAGES and n_ref >= MIN_CATEGORY_IMAGES:
        pooled = b5f4_fid_from_features(np.concatenate(gen_feats), np.concatenate(ref_feats))
        pooled_row["fid"] = pooled
    else:
        pooled_row["warning"] = "undersized"
    rows.append(pooled_row)
    return {"status": "OK", "rows": rows, "pooled": pooled, "diag": {"reason": "ok", "skipped": skipped}}
