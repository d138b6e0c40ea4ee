# Folder: platter/pl_core/block_5_metrics
# File:   b5f2_frechet.py

from __future__ import annotations

import numpy as np
import scipy.linalg

from pl_core.block_5_metrics.b5f1_gaussian_stats import GaussianStats
from pl_core.errors import DataError, NumericError

__all__ = ["b5f2_frechet_distance", "psd_sqrt", "NEG_EIG_RTOL"]

# eigenvalues below -NEG_EIG_RTOL·λmax mean the inputs were not PSD; smaller negatives are round-off
NEG_EIG_RTOL = 1e-6


def _eigh(m: np.ndarray, what: str) -> tuple:
    try:
        w, v = scipy.linalg.eigh(m)
    except (np.linalg.LinAlgError, ValueError) as e:
        raise NumericError(f"eigendecomposition of {what} failed: {e}", {"matrix": what, "dim": int(m.shape[0])})
    if not (np.isfinite(w).all() and np.isfinite(v).all()):
        raise NumericError(f"eigendecomposition of {what} produced non-finite values", {"matrix": what})
    return w, v


def _check_spectrum(w: np.ndarray, what: str) -> np.ndarray:
    top = float(max(w.max(initial=0.0), 0.0))
    low = float(w.min(initial=0.0))
    if low < -NEG_EIG_RTOL * max(top, np.finfo(np.float64).tiny):
        raise NumericError(
            f"{what} has a significantly negative eigenvalue",
            {"matrix": what, "min_eig": low, "max_eig": top, "rtol": NEG_EIG_RTOL},
        )
    return np.clip(w, 0.0, None)


def psd_sqrt(m: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix."""
    w, v = _eigh(0.5 * (m + m.T), "covariance")
    w = _check_spectrum(w, "covariance")
    return (v * np.sqrt(w)) @ v.T


def b5f2_frechet_distance(a: GaussianStats, b: GaussianStats) -> float:
    """
    B5F2 — Metrics.FrechetDistance
    ‖μa − μb‖² + Tr(Σa) + Tr(Σb) − 2·Tr((Σa Σb)^½), where the trace of the product root is taken
    from the eigenvalues of the symmetric similar matrix Σa^½ Σb Σa^½. Result clamped to ≥ 0.
    """
    if a.dim != b.dim:
        raise DataError(f"feature dims differ: {a.dim} vs {b.dim}")
    sa = psd_sqrt(a.cov)
    m = sa @ b.cov @ sa
    lam, _ = _eigh(0.5 * (m + m.T), "covariance product")
    lam = _check_spectrum(lam, "covariance product")

    diff = a.mean - b.mean
    fd = float(diff @ diff + np.trace(a.cov) + np.trace(b.cov) - 2.0 * np.sqrt(lam).sum())
    if not np.isfinite(fd):
        raise NumericError("Fréchet distance is not finite", {"dim": a.dim})
    return max(fd, 0.0)
