# Folder: platter/pl_runtime/cli
# File:   manifest.py

from __future__ import annotations

import hashlib
import json
import os
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, Iterable, Optional

from pydantic import BaseModel, Field

from pl_core.errors import ConfigError
from pl_runtime import PLATTER_VERSION

__all__ = ["RunManifest", "MANIFEST_FILE", "write_manifest", "read_manifest", "sha1_json", "sha1_file", "tree_checksum", "now_iso"]

MANIFEST_FILE = "run_manifest.json"


def now_iso() -> str:
    return datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def sha1_json(obj: Any) -> str:
    blob = json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False, default=str)
    return hashlib.sha1(blob.encode("utf-8")).hexdigest()


def sha1_file(path: str | Path) -> str:
    h = hashlib.sha1()
    with Path(path).open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def tree_checksum(root: str | Path, skip: Iterable[str] = (MANIFEST_FILE,)) -> str:
    """sha1 over (relative path, file sha1) for every file under root, in sorted order."""
    base = Path(root)
    skip = set(skip)
    h = hashlib.sha1()
    for p in sorted(q for q in base.rglob("*") if q.is_file() and q.name not in skip):
        h.update(p.relative_to(base).as_posix().encode("utf-8"))
        h.update(sha1_file(p).encode("ascii"))
    return h.hexdigest()


class RunManifest(BaseModel):
    """Provenance record of one command run; `config` is the full resolved argument echo."""

    command: str
    run_id: str
    config: Dict[str, Any] = Field(default_factory=dict)
    seeds: Dict[str, int] = Field(default_factory=dict)
    inputs: Dict[str, Any] = Field(default_factory=dict)
    outputs: Dict[str, Any] = Field(default_factory=dict)
    checksums: Dict[str, str] = Field(default_factory=dict)
    metrics: Dict[str, Any] = Field(default_factory=dict)
    code_version: str = PLATTER_VERSION
    started_at: str = Field(default_factory=now_iso)
    wall_time: float = 0.0
    exit_status: int = 0
    error: Optional[Dict[str, Any]] = None

    def content_hash(self) -> str:
        body = self.model_dump(mode="json", exclude={"started_at", "wall_time", "run_id"})
        return sha1_json(body)


def write_manifest(manifest: RunManifest, out_dir: str | Path) -> Path:
    target = Path(out_dir) / MANIFEST_FILE
    target.parent.mkdir(parents=True, exist_ok=True)
    body = manifest.model_dump(mode="json")
    body["manifest_hash"] = manifest.content_hash()
    tmp = target.with_suffix(".json.tmp")
    tmp.write_text(json.dumps(body, indent=2, ensure_ascii=False), encoding="utf-8")
    os.replace(tmp, target)
    return target


def read_manifest(path: str | Path) -> RunManifest:
    p = Path(path)
    if p.is_dir():
        p = p / MANIFEST_FILE
    if not p.is_file():
        raise ConfigError(f"manifest not found: {p}")
    try:
        body = json.loads(p.read_text(encoding="utf-8"))
    except ValueError as e:
        raise ConfigError(f"manifest {p} is not valid JSON: {e}")
    body.pop("manifest_hash", None)
    return RunManifest.model_validate(body)
