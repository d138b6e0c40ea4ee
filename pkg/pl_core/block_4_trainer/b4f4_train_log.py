# Folder: platter/pl_core/block_4_trainer
# File:   b4f4_train_log.py

from __future__ import annotations

import csv
import math
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

__all__ = ["TrainLog", "LOG_FIELDS", "metric_record"]

# CSV header of the append-only training log, one row per stage
LOG_FIELDS = ["epoch", "step", "stage", "status", "d_loss", "g_adv", "recon", "r1", "lr", "wall_time"]
_FLOAT_FIELDS = ("d_loss", "g_adv", "recon", "r1", "lr", "wall_time")


def _now_z() -> str:
    return datetime.now(timezone.utc).isoformat().replace("+00:00", "Z")


def metric_record(name: str, value: float, labels: Dict[str, Any]) -> Dict[str, Any]:
    clean = {k: v for k, v in labels.items() if v is not None}
    return {"name": name, "value": float(value), "ts": _now_z(), "labels": clean}


def _parse(row: Dict[str, str]) -> Dict[str, Any]:
    out: Dict[str, Any] = {"epoch": int(row["epoch"]), "step": int(row["step"]), "stage": row["stage"], "status": row["status"]}
    for k in _FLOAT_FIELDS:
        v = row.get(k, "")
        out[k] = float(v) if v not in ("", None) else None
    return out


class TrainLog:
    """Per-stage records ordered by (epoch, step); optionally mirrored to an append-only CSV."""

    def __init__(self, csv_path: Optional[str | Path] = None, keep_through_epoch: Optional[int] = None):
        self.records: List[Dict[str, Any]] = []
        self.csv_path = Path(csv_path) if csv_path else None
        if self.csv_path is None:
            return
        self.csv_path.parent.mkdir(parents=True, exist_ok=True)
        if keep_through_epoch is not None and self.csv_path.is_file():
            # resuming: drop rows past the checkpoint so replayed epochs are not duplicated
            with self.csv_path.open("r", encoding="utf-8", newline="") as fh:
                self.records = [r for r in map(_parse, csv.DictReader(fh)) if r["epoch"] <= keep_through_epoch]
        with self.csv_path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=LOG_FIELDS)
            w.writeheader()
            for r in self.records:
                w.writerow(self._row(r))

    @staticmethod
    def _row(rec: Dict[str, Any]) -> Dict[str, Any]:
        return {k: ("" if rec.get(k) is None else rec.get(k)) for k in LOG_FIELDS}

    @property
    def last_step(self) -> int:
        return self.records[-1]["step"] if self.records else -1

    def append(self, rec: Dict[str, Any]) -> None:
        if self.records:
            prev = self.records[-1]
            if (rec["epoch"], rec["step"]) <= (prev["epoch"], prev["step"]):
                raise ValueError("train log records must be strictly ordered by (epoch, step)")
        row = {k: rec.get(k) for k in LOG_FIELDS}
        self.records.append(row)
        if self.csv_path is not None:
            with self.csv_path.open("a", encoding="utf-8", newline="") as fh:
                csv.DictWriter(fh, fieldnames=LOG_FIELDS).writerow(self._row(row))

    def __len__(self) -> int:
        return len(self.records)

    # ---- views ----

    def metric_sequence(self) -> List[tuple]:
        """Every logged value except wall time, for reproducibility comparisons."""
        return [tuple(r[k] for k in LOG_FIELDS if k != "wall_time") for r in self.records]

    def epoch_mean(self, field: str, epoch: int) -> float:
        vals = [r[field] for r in self.records if r["epoch"] == epoch and r.get(field) is not None]
        return sum(vals) / len(vals) if vals else math.nan

    def telemetry(self) -> List[Dict[str, Any]]:
        out: List[Dict[str, Any]] = []
        for r in self.records:
            labels = {"epoch": r["epoch"], "step": r["step"], "stage": r["stage"]}
            for k in ("d_loss", "g_adv", "recon", "r1", "lr"):
                if r.get(k) is not None:
                    out.append(metric_record(f"train.{k}", r[k], labels))
        return out
