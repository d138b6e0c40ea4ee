# Folder: platter/pl_core/block_5_metrics
# File:   b5f3_extractors.py

from __future__ import annotations

import hashlib
import json
import logging
import os
from pathlib import Path
from typing import Any, Dict, Optional, Protocol, Tuple, runtime_checkable

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from pl_core.block_1_data.b1f0_dataset import ImageDataset
from pl_core.block_1_data.b1f4_batch_iterator import b1f4_batch_iterator
from pl_core.block_2_model.b2f3_forward import images_to_tensor
from pl_core.errors import ConfigError, DataError

__all__ = [
    "FeatureExtractor",
    "DeskClassifier",
    "DeskExtractor",
    "ImportedFeatures",
    "b5f3_train_desk_classifier",
    "save_extractor",
    "load_extractor",
    "write_feature_file",
    "read_feature_file",
    "load_imported",
    "DESK_EXTRACTOR_NAME",
    "EXTRACT_BATCH",
]

log = logging.getLogger(__name__)

DESK_EXTRACTOR_NAME = "desk-classifier"
EXTRACTOR_FORMAT = "platter-extractor"
EXTRACT_BATCH = 128


@runtime_checkable
class FeatureExtractor(Protocol):
    """Named, versioned map from images (N,H,W,3 in [-1,1]) to an N×dim float64 matrix."""

    name: str

    @property
    def version(self) -> str: ...

    @property
    def dim(self) -> int: ...

    def extract(self, images: np.ndarray) -> np.ndarray: ...


class DeskClassifier(nn.Module):
    """Small CNN over the synthetic categories; the penultimate layer is the feature space."""

    def __init__(self, num_categories: int, feature_dim: int = 64, width: int = 32):
        super().__init__()
        self.num_categories = num_categories
        self.feature_dim = feature_dim
        self.width = width
        self.body = nn.Sequential(
            nn.Conv2d(3, width, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(width, width * 2, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.Conv2d(width * 2, width * 4, 3, stride=2, padding=1),
            nn.ReLU(),
            nn.AdaptiveAvgPool2d(1),
            nn.Flatten(),
            nn.Linear(width * 4, feature_dim),
            nn.ReLU(),
        )
        self.head = nn.Linear(feature_dim, num_categories)

    def features(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.head(self.features(x))


class DeskExtractor:
    """Penultimate-layer features of a trained DeskClassifier; eval mode only, so deterministic per image."""

    name = DESK_EXTRACTOR_NAME

    def __init__(self, classifier: DeskClassifier, image_size: int):
        self.classifier = classifier.eval()
        self.image_size = image_size

    @property
    def dim(self) -> int:
        return self.classifier.feature_dim

    @property
    def version(self) -> str:
        h = hashlib.sha1()
        for key, t in sorted(self.classifier.state_dict().items()):
            h.update(key.encode("utf-8"))
            h.update(t.detach().cpu().numpy().tobytes())
        return f"v1-{h.hexdigest()[:12]}"

    def _check(self, images: np.ndarray) -> np.ndarray:
        arr = np.asarray(images, dtype=np.float32)
        if arr.ndim == 3:
            arr = arr[None]
        if arr.ndim != 4 or arr.shape[1:3] != (self.image_size, self.image_size):
            raise DataError(f"extractor expects (N,{self.image_size},{self.image_size},3) images, got {arr.shape}")
        return arr

    @torch.no_grad()
    def _run(self, images: np.ndarray, fn: Any) -> np.ndarray:
        arr = self._check(images)
        chunks = [fn(images_to_tensor(arr[i:i + EXTRACT_BATCH])).double().numpy() for i in range(0, len(arr), EXTRACT_BATCH)]
        if not chunks:
            return np.zeros((0, self.dim), dtype=np.float64)
        return np.concatenate(chunks, axis=0)

    def extract(self, images: np.ndarray) -> np.ndarray:
        return self._run(images, self.classifier.features)

    def logits(self, images: np.ndarray) -> np.ndarray:
        return self._run(images, self.classifier)

    def classify(self, images: np.ndarray) -> np.ndarray:
        """Predicted category id per image."""
        if len(np.asarray(images)) == 0:
            return np.zeros((0,), dtype=np.int64)
        return self.logits(images).argmax(axis=1).astype(np.int64)


class ImportedFeatures:
    """External-import kind: a precomputed feature matrix read from a feature file."""

    def __init__(self, name: str, features: np.ndarray):
        self.name = name
        self.features = np.asarray(features, dtype=np.float64)

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])

    @property
    def version(self) -> str:
        return f"import-{hashlib.sha1(self.features.tobytes()).hexdigest()[:12]}"

    def extract(self, images: np.ndarray) -> np.ndarray:
        raise DataError(f"{self.name} is an imported feature set; it cannot embed new images")


def b5f3_train_desk_classifier(
    dataset: ImageDataset,
    epochs: int = 8,
    seed: int = 0,
    batch_size: int = 64,
    lr: float = 1e-3,
    feature_dim: int = 64,
) -> DeskExtractor:
    """
    B5F3 — Metrics.TrainDeskClassifier
    Cross-entropy training of DeskClassifier on a labelled dataset; seeded init and batch order.
    """
    if not dataset.is_labelled or dataset.num_categories is None:
        raise ConfigError("desk classifier needs a labelled dataset with num_categories")
    if dataset.size == 0:
        raise DataError("desk classifier training set is empty")
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(int(seed))
        model = DeskClassifier(dataset.num_categories, feature_dim=feature_dim)
    opt = torch.optim.Adam(model.parameters(), lr=lr)
    model.train()
    for epoch in range(epochs):
        total, hits, seen = 0.0, 0, 0
        for batch in b1f4_batch_iterator(dataset, batch_size, seed, epoch):
            x = images_to_tensor(batch["images"])
            y = torch.as_tensor(batch["categories"], dtype=torch.long)
            opt.zero_grad(set_to_none=True)
            logits = model(x)
            loss = F.cross_entropy(logits, y)
            loss.backward()
            opt.step()
            total += float(loss.detach()) * len(y)
            hits += int((logits.argmax(dim=1) == y).sum())
            seen += len(y)
        log.debug("desk classifier epoch %d loss=%.4f acc=%.3f", epoch, total / seen, hits / seen)
    return DeskExtractor(model, dataset.image_shape[0])


# ------------------------- persistence -------------------------

def save_extractor(extractor: DeskExtractor, path: str | Path) -> Path:
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    clf = extractor.classifier
    blob = {
        "format": EXTRACTOR_FORMAT,
        "name": extractor.name,
        "num_categories": clf.num_categories,
        "feature_dim": clf.feature_dim,
        "width": clf.width,
        "image_size": extractor.image_size,
        "state": {k: v.detach().cpu() for k, v in clf.state_dict().items()},
    }
    tmp = target.with_suffix(target.suffix + ".tmp")
    torch.save(blob, tmp)
    os.replace(tmp, target)
    return target


def load_extractor(path: str | Path) -> DeskExtractor:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"extractor file not found: {p}")
    try:
        blob = torch.load(p, map_location="cpu", weights_only=True)
    except Exception as e:
        raise DataError(f"unreadable extractor {p}: {e.__class__.__name__}: {e}")
    if not isinstance(blob, dict) or blob.get("format") != EXTRACTOR_FORMAT:
        raise DataError(f"{p} is not a {EXTRACTOR_FORMAT} file")
    clf = DeskClassifier(int(blob["num_categories"]), feature_dim=int(blob["feature_dim"]), width=int(blob["width"]))
    clf.load_state_dict(blob["state"])
    return DeskExtractor(clf, int(blob["image_size"]))


# ------------------------- feature files -------------------------
# line 1: {"extractor": <name>, "dim": d, "n": n}
# then n lines of d whitespace-separated reals

def write_feature_file(path: str | Path, features: np.ndarray, extractor: str) -> Path:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"features must be an n×d matrix, got shape {x.shape}")
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    tmp = target.with_suffix(target.suffix + ".tmp")
    with tmp.open("w", encoding="utf-8") as fh:
        fh.write(json.dumps({"extractor": extractor, "dim": int(x.shape[1]), "n": int(x.shape[0])}) + "\n")
        for row in x:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")
    os.replace(tmp, target)
    return target


def read_feature_file(path: str | Path) -> Tuple[str, np.ndarray]:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"feature file not found: {p}")
    with p.open("r", encoding="utf-8") as fh:
        try:
            header: Dict[str, Any] = json.loads(fh.readline())
            name, dim, n = str(header["extractor"]), int(header["dim"]), int(header["n"])
        except (ValueError, KeyError, TypeError) as e:
            raise DataError(f"{p}: bad feature-file header ({e})")
        rows = [line.split() for line in fh if line.strip()]
    if len(rows) != n:
        raise DataError(f"{p}: header says n={n}, found {len(rows)} rows")
    bad = [i for i, r in enumerate(rows) if len(r) != dim]
    if bad:
        raise DataError(f"{p}: {len(bad)} row(s) do not have dim={dim}", {"first_bad_row": bad[0]})
    try:
        x = np.asarray(rows, dtype=np.float64).reshape(n, dim)
    except ValueError as e:
        raise DataError(f"{p}: non-numeric feature value ({e})")
    return name, x


def load_imported(path: str | Path, expected_name: Optional[str] = None) -> ImportedFeatures:
    name, x = read_feature_file(path)
    if expected_name is not None and name != expected_name:
        raise DataError(f"feature file {path} was made by {name!r}, expected {expected_name!r}")
    return ImportedFeatures(name, x)
