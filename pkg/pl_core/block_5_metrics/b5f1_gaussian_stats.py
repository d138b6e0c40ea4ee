# Folder: platter/pl_core/block_5_metrics
# File:   b5f1_gaussian_stats.py

from __future__ import annotations

import numpy as np
from pydantic import BaseModel, ConfigDict, model_validator

from pl_core.errors import DataError

__all__ = ["GaussianStats", "b5f1_gaussian_stats", "SYMMETRY_TOL", "PSD_TOL"]

SYMMETRY_TOL = 1e-8
PSD_TOL = 1e-8


class GaussianStats(BaseModel):
    """Mean and covariance of an n×d feature matrix (float64)."""

    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    mean: np.ndarray
    cov: np.ndarray
    n: int
    population: bool = False

    @model_validator(mode="after")
    def _check(self) -> "GaussianStats":
        d = self.mean.shape[0] if self.mean.ndim == 1 else -1
        if d < 1 or self.cov.shape != (d, d):
            raise ValueError(f"mean {self.mean.shape} and cov {self.cov.shape} do not describe a d-dim Gaussian")
        scale = max(1.0, float(np.abs(self.cov).max(initial=0.0)))
        if float(np.abs(self.cov - self.cov.T).max(initial=0.0)) > SYMMETRY_TOL * scale:
            raise ValueError("covariance is not symmetric")
        if float(np.linalg.eigvalsh(self.cov).min()) < -PSD_TOL * scale:
            raise ValueError("covariance is not positive semi-definite")
        return self

    @property
    def dim(self) -> int:
        return int(self.mean.shape[0])


def b5f1_gaussian_stats(features: np.ndarray, population: bool = False) -> GaussianStats:
    """
    B5F1 — Metrics.GaussianStats
    Sample mean and covariance of the rows. Unbiased (1/(n−1)) by default; `population=True` uses 1/n,
    which makes the statistics invariant to duplicating the whole set.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise DataError(f"features must be an n×d matrix, got shape {x.shape}")
    n = x.shape[0]
    if n < 2:
        raise DataError(f"need at least 2 feature rows, got {n}", {"n": n})
    if not np.isfinite(x).all():
        raise DataError("features contain non-finite values")
    mean = x.mean(axis=0)
    cov = np.atleast_2d(np.cov(x, rowvar=False, ddof=0 if population else 1))
    cov = 0.5 * (cov + cov.T)
    return GaussianStats(mean=mean, cov=cov, n=n, population=population)
