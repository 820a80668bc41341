"""SMOTE: synthetic minority samples on segments to same-class neighbours."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SmoteResult:
    points: np.ndarray
    base: np.ndarray  # index into the input of each point's base sample
    neighbor: np.ndarray  # index of the neighbour it was interpolated towards
    lam: np.ndarray


def nearest_neighbors(features, k: int) -> np.ndarray:
    """Indices of each row's ``min(k, n-1)`` nearest other rows (Euclidean).

    Ties resolve to the lower index.
    """
    X = np.asarray(features, dtype=np.float64)
    d2 = ((X[:, None, :] - X[None, :, :]) ** 2).sum(axis=-1)
    np.fill_diagonal(d2, np.inf)
    k = min(k, len(X) - 1)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def smote(features, n_synthetic: int, k: int = 5, seed=0, lam=None) -> SmoteResult:
    """Generate ``n_synthetic`` points for one class.

    Each point is ``base + lam * (neighbor - base)`` with a uniformly chosen
    base, a uniformly chosen neighbour among its k nearest same-class samples
    and ``lam ~ U[0, 1]``. Pass ``lam`` to force the interpolation weight.
    A single-sample class yields exact copies, with a warning.
    """
    X = np.asarray(features, dtype=np.float64)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("smote needs at least one sample")
    rng = np.random.default_rng(seed)
    if n_synthetic == 0:
        empty = np.zeros(0, dtype=np.int64)
        return SmoteResult(np.zeros((0, X.shape[1])), empty, empty, np.zeros(0))
    if len(X) == 1:
        warnings.warn("SMOTE on a single-sample class: emitting copies", RuntimeWarning, stacklevel=2)
        zeros = np.zeros(n_synthetic, dtype=np.int64)
        return SmoteResult(np.repeat(X, n_synthetic, axis=0), zeros, zeros, np.zeros(n_synthetic))

    nn = nearest_neighbors(X, k)
    base = rng.integers(0, len(X), size=n_synthetic)
    pick = rng.integers(0, nn.shape[1], size=n_synthetic)
    neighbor = nn[base, pick]
    if lam is None:
        lam = rng.random(n_synthetic)
    else:
        lam = np.broadcast_to(np.asarray(lam, dtype=np.float64), (n_synthetic,)).copy()
    points = X[base] + lam[:, None] * (X[neighbor] - X[base])
    return SmoteResult(points, base, neighbor, lam)
