# Folder: platter/pl_core/block_1_data
# File:   b1f3_synthesize_dataset.py

from __future__ import annotations

import logging
import math
from typing import Any, Dict, List, Literal, Optional, Tuple

import numpy as np
from PIL import Image, ImageDraw
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from scipy import ndimage

from pl_core.block_1_data.b1f0_dataset import (
    RGB,
    DatasetItem,
    ImageDataset,
    check_image_size,
    color_to_unit,
)

__all__ = [
    "TextureFamily",
    "SynthSpec",
    "default_texture_families",
    "b1f3_synthesize_dataset",
    "render_container_interior",
    "SEPARATION",
]

log = logging.getLogger(__name__)

ContainerShape = Literal["circle", "ellipse", "rounded_rectangle"]
TextureKind = Literal["stripes", "dots", "checker", "grain"]

# minimum max-channel distance (0..255) between any food colour and the background
SEPARATION = 48
MAX_BLOB_ATTEMPTS = 12

_BASE_FAMILIES: List[Tuple[str, Tuple[RGB, RGB], int]] = [
    ("stripes", ((214, 120, 40), (240, 200, 90)), 8),
    ("dots", ((120, 170, 60), (230, 230, 140)), 10),
    ("checker", ((170, 60, 50), (230, 150, 120)), 8),
    ("grain", ((235, 225, 200), (200, 185, 150)), 4),
]


class TextureFamily(BaseModel):
    """Procedural texture recipe for one category."""

    model_config = ConfigDict(frozen=True)

    kind: TextureKind
    palette: Tuple[RGB, RGB]
    scale: int = Field(8, ge=2, description="texture period in pixels at 64×64, scaled with image size")


def default_texture_families(num_categories: int) -> List[TextureFamily]:
    fams: List[TextureFamily] = []
    for k in range(num_categories):
        kind, (a, b), scale = _BASE_FAMILIES[k % len(_BASE_FAMILIES)]
        shift = (k // len(_BASE_FAMILIES)) % 3
        # rotate channels for every extra round of families so palettes stay distinct
        a = tuple(a[(i + shift) % 3] for i in range(3))
        b = tuple(b[(i + shift) % 3] for i in range(3))
        fams.append(TextureFamily(kind=kind, palette=(a, b), scale=scale))
    return fams


class SynthSpec(BaseModel):
    """
    Procedural scene recipe. Stored masks cover the food blobs only, never the container.
    Shape-preservation scoring segments generated images against the background colour, so it
    expects food-only scenes: build those sets with render_container=False. With the container
    drawn, the segmentation also picks up the plate and the IoU against the food mask drops.
    """

    model_config = ConfigDict(frozen=True)

    num_images: int = Field(2000, ge=0)
    num_categories: int = Field(4, ge=1)
    image_size: int = 64
    seed: int = 0
    background_color: RGB = (0, 0, 0)
    container_color: RGB = (205, 205, 205)
    rim_color: RGB = (150, 150, 150)
    container_shapes: Tuple[ContainerShape, ...] = ("circle", "ellipse", "rounded_rectangle")
    texture_families: Tuple[TextureFamily, ...] = ()
    render_container: bool = True

    @model_validator(mode="before")
    @classmethod
    def _fill_families(cls, data: Any) -> Any:
        if isinstance(data, dict) and not data.get("texture_families"):
            data = dict(data)
            data["texture_families"] = default_texture_families(int(data.get("num_categories", 4)))
        return data

    @field_validator("image_size")
    @classmethod
    def _size(cls, v: int) -> int:
        if not check_image_size(v):
            raise ValueError("image_size must be a positive multiple of 32")
        return v

    @field_validator("container_shapes")
    @classmethod
    def _shapes(cls, v: Tuple[str, ...]) -> Tuple[str, ...]:
        if not v:
            raise ValueError("container_shapes must not be empty")
        return tuple(sorted(set(v)))

    @model_validator(mode="after")
    def _families(self) -> "SynthSpec":
        if len(self.texture_families) != self.num_categories:
            raise ValueError("num_categories must equal the number of texture families")
        bg = np.asarray(self.background_color)
        for i, fam in enumerate(self.texture_families):
            for col in fam.palette:
                if np.abs(np.asarray(col) - bg).max() < SEPARATION:
                    raise ValueError(f"texture family {i} colour {col} is too close to the background")
        return self

    @property
    def category_names(self) -> Tuple[str, ...]:
        return tuple(f"c{k:02d}_{fam.kind}" for k, fam in enumerate(self.texture_families))


# ------------------------- geometry -------------------------

def _draw_container(draw: ImageDraw.ImageDraw, shape: str, box: List[float], radius: float, **kw: Any) -> None:
    if shape == "rounded_rectangle":
        draw.rounded_rectangle(box, radius=radius, **kw)
    else:
        draw.ellipse(box, **kw)


def _inset(box: List[float], d: float) -> List[float]:
    return [box[0] + d, box[1] + d, box[2] - d, box[3] - d]


def render_container_interior(meta: Dict[str, Any], size: int) -> np.ndarray:
    """Binary raster of the container fill inside its rim, recomputed from a sample's metadata."""
    c = meta["container"]
    m = Image.new("L", (size, size), 0)
    inner = _inset(list(c["box"]), c["rim"])
    _draw_container(ImageDraw.Draw(m), c["shape"], inner, max(0.0, c["radius"] - c["rim"]), fill=1)
    return np.asarray(m, dtype=np.uint8)


def _container(rng: np.random.Generator, spec: SynthSpec) -> Dict[str, Any]:
    s = spec.image_size
    shape = spec.container_shapes[int(rng.integers(len(spec.container_shapes)))]
    cx = s / 2 + rng.uniform(-0.05, 0.05) * s
    cy = s / 2 + rng.uniform(-0.05, 0.05) * s
    if shape == "circle":
        ax = ay = rng.uniform(0.36, 0.45) * s
    elif shape == "ellipse":
        ax, ay = rng.uniform(0.30, 0.45, size=2) * s
    else:
        ax, ay = rng.uniform(0.30, 0.43, size=2) * s
    rim = max(1, s // 32)
    radius = 0.25 * min(ax, ay) if shape == "rounded_rectangle" else 0.0
    return {
        "shape": shape,
        "center": [float(cx), float(cy)],
        "axes": [float(ax), float(ay)],
        "box": [float(cx - ax), float(cy - ay), float(cx + ax), float(cy + ay)],
        "rim": int(rim),
        "radius": float(radius),
    }


def _blob_polygon(rng: np.random.Generator, anchor: Tuple[float, float], room: float, shrink: float) -> List[Tuple[float, float]]:
    """Smooth closed star-shaped curve whose interior always contains the anchor."""
    off_r = rng.uniform(0.0, 0.15) * room * shrink
    off_t = rng.uniform(0.0, 2 * math.pi)
    cx = anchor[0] + off_r * math.cos(off_t)
    cy = anchor[1] + off_r * math.sin(off_t)
    r0 = rng.uniform(0.35, 0.55) * room * shrink
    harmonics = [(k, rng.uniform(0.0, 0.15), rng.uniform(0.0, 2 * math.pi)) for k in (2, 3, 4)]
    pts = []
    for t in np.linspace(0.0, 2 * math.pi, 72, endpoint=False):
        r = r0 * (1.0 + sum(a * math.cos(k * t + p) for k, a, p in harmonics))
        pts.append((cx + r * math.cos(t), cy + r * math.sin(t)))
    return pts


def _food_mask(rng: np.random.Generator, spec: SynthSpec, container: Dict[str, Any], interior: np.ndarray) -> Tuple[np.ndarray, int]:
    s = spec.image_size
    ax, ay = container["axes"]
    room = min(ax, ay) - container["rim"] - 1.0
    anchor = (container["center"][0], container["center"][1])
    n_blobs = int(rng.integers(1, 4))
    union = np.zeros((s, s), dtype=bool)
    for _ in range(n_blobs):
        shrink = 1.0
        for _attempt in range(MAX_BLOB_ATTEMPTS):
            poly = _blob_polygon(rng, anchor, room, shrink)
            m = Image.new("L", (s, s), 0)
            ImageDraw.Draw(m).polygon(poly, fill=1)
            blob = np.asarray(m, dtype=bool)
            if blob.any() and not np.any(blob & ~interior):
                union |= blob
                break
            shrink *= 0.85
    # blobs share the anchor, so the union is one component; closing holes keeps it simply connected
    union = ndimage.binary_fill_holes(union) & interior
    return union.astype(np.uint8), n_blobs


# ------------------------- textures -------------------------

def _texture(rng: np.random.Generator, fam: TextureFamily, size: int, bg: np.ndarray) -> np.ndarray:
    period = max(2.0, fam.scale * size / 64.0)
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    theta = rng.uniform(0.0, math.pi)
    phase = rng.uniform(0.0, period)
    u = xx * math.cos(theta) + yy * math.sin(theta) + phase
    v = -xx * math.sin(theta) + yy * math.cos(theta) + phase

    if fam.kind == "stripes":
        t = 0.5 + 0.5 * np.sin(2 * math.pi * u / period)
    elif fam.kind == "dots":
        du = (u % period) - period / 2
        dv = (v % period) - period / 2
        t = (np.hypot(du, dv) < period * 0.3).astype(np.float64)
    elif fam.kind == "checker":
        t = ((np.floor(u / period) + np.floor(v / period)) % 2).astype(np.float64)
    else:
        t = ndimage.gaussian_filter(rng.uniform(0.0, 1.0, size=(size, size)), sigma=period / 4)
        t = (t - t.min()) / max(1e-9, float(t.max() - t.min()))

    a, b = (color_to_unit(c).astype(np.float64) for c in fam.palette)
    tex = a[None, None, :] + t[..., None] * (b - a)[None, None, :]
    # snap anything that drifted toward the background back to the primary colour
    near = np.abs(tex - bg[None, None, :]).max(axis=-1) < SEPARATION / 127.5
    tex[near] = a
    return tex.astype(np.float32)


# ------------------------- sampling -------------------------

def _sample(spec: SynthSpec, index: int, category: int) -> DatasetItem:
    rng = np.random.default_rng([spec.seed, index])
    s = spec.image_size
    container = _container(rng, spec)
    interior = render_container_interior({"container": container}, s).astype(bool)
    food, n_blobs = _food_mask(rng, spec, container, interior)

    canvas = Image.new("RGB", (s, s), tuple(spec.background_color))
    if spec.render_container:
        _draw_container(
            ImageDraw.Draw(canvas), container["shape"], container["box"], container["radius"],
            fill=tuple(spec.container_color), outline=tuple(spec.rim_color), width=container["rim"],
        )
    base = np.asarray(canvas, dtype=np.float32) / 127.5 - 1.0
    bg = color_to_unit(spec.background_color).astype(np.float64)
    tex = _texture(rng, spec.texture_families[category], s, bg)
    img = np.where(food[..., None].astype(bool), tex, base).astype(np.float32)

    return DatasetItem(
        name=f"{index:05d}",
        image=np.clip(img, -1.0, 1.0),
        mask=food,
        category=category,
        meta={"index": index, "container": container, "blobs": n_blobs},
    )


def _split(n: int, k: int) -> Tuple[List[int], List[int]]:
    """Block-interleaved split: every other run of k consecutive samples goes to the shape set."""
    even = [i for i in range(n) if (i // k) % 2 == 0]
    odd = [i for i in range(n) if (i // k) % 2 == 1]
    order = even + odd
    n_shape = (n + 1) // 2
    return sorted(order[:n_shape]), sorted(order[n_shape:])


def b1f3_synthesize_dataset(spec: SynthSpec) -> Dict[str, Any]:
    """
    B1F3 — Data.SynthesizeDataset
    Seeded procedural food scenes: container silhouette on the background, 1–3 smooth blobs inside
    the container interior, blobs filled with the category texture. The stored mask is the food region.
    Output:
      {
        "status": "OK|FAIL",
        "shape_set": ImageDataset, "texture_set": ImageDataset,     # only on OK
        "diag": {"reason": "ok|cannot_split", "counts": {...}}
      }
    """
    if spec.num_images < 2:
        return {
            "status": "FAIL",
            "diag": {"reason": "cannot_split", "message": f"num_images={spec.num_images} cannot be split into two sets"},
        }

    k = spec.num_categories
    items = [_sample(spec, i, i % k) for i in range(spec.num_images)]
    shape_ix, texture_ix = _split(spec.num_images, k)

    def _ds(ix: List[int]) -> ImageDataset:
        return ImageDataset(
            items=tuple(items[i] for i in ix),
            num_categories=k,
            category_names=spec.category_names,
            background_color=tuple(spec.background_color),
        )

    shape_set, texture_set = _ds(shape_ix), _ds(texture_ix)
    log.info("synthesized %d images (seed=%d): shape=%d texture=%d", spec.num_images, spec.seed, shape_set.size, texture_set.size)
    return {
        "status": "OK",
        "shape_set": shape_set,
        "texture_set": texture_set,
        "diag": {"reason": "ok", "counts": {"shape": shape_set.size, "texture": texture_set.size}},
    }
