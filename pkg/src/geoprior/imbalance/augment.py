"""MixUp on encoded feature vectors."""

from __future__ import annotations

import numpy as np

from ..errors import ShapeMismatch


def mixup_batch(batch_a, batch_b, lam: float):
    """Convex combination of two (features, soft-label) batches."""
    xa, ya = (np.asarray(v, dtype=np.float64) for v in batch_a)
    xb, yb = (np.asarray(v, dtype=np.float64) for v in batch_b)
    if xa.shape != xb.shape or ya.shape != yb.shape or len(xa) != len(ya):
        raise ShapeMismatch(f"cannot mix batches {xa.shape}/{ya.shape} and {xb.shape}/{yb.shape}")
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lambda must be in [0, 1]")
    return lam * xa + (1.0 - lam) * xb, lam * ya + (1.0 - lam) * yb


mixup = mixup_batch
