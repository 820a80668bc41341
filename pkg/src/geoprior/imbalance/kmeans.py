"""Lloyd's k-means with k-means++ seeding."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class KMeansResult:
    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    iterations: int
    k_requested: int

    @property
    def k(self) -> int:
        return len(self.centroids)

    @property
    def clamped(self) -> bool:
        return self.k < self.k_requested


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(axis=-1)


def kmeans_pp_init(X, k, rng) -> np.ndarray:
    centers = [X[rng.integers(len(X))]]
    d2 = _sq_dists(X, np.array(centers)).min(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            break
        i = int(np.searchsorted(np.cumsum(d2) / total, rng.random(), side="right"))
        centers.append(X[min(i, len(X) - 1)])
        d2 = np.minimum(d2, _sq_dists(X, centers[-1][None, :])[:, 0])
    return np.array(centers)


def kmeans(points, k: int, seed=0, max_iter: int = 100, tol: float = 1e-6) -> KMeansResult:
    """Cluster ``points`` into ``k`` groups; k is clamped to the number of
    distinct points. Stops once no centroid moves more than ``tol``."""
    X = np.asarray(points, dtype=np.float64)
    if X.ndim == 1:
        X = X[:, None]
    if len(X) == 0 or k < 1:
        raise ValueError("kmeans needs points and k >= 1")
    k_eff = min(k, len(np.unique(X, axis=0)))
    rng = np.random.default_rng(seed)
    C = kmeans_pp_init(X, k_eff, rng)

    it = 0
    for it in range(1, max_iter + 1):
        assign = np.argmin(_sq_dists(X, C), axis=1)
        new_C = C.copy()
        for j in range(len(C)):
            members = X[assign == j]
            if len(members):
                new_C[j] = members.mean(axis=0)
        shift = np.sqrt(((new_C - C) ** 2).sum(axis=1)).max()
        C = new_C
        if shift < tol:
            break
    assign = np.argmin(_sq_dists(X, C), axis=1)
    inertia = float(((X - C[assign]) ** 2).sum())
    return KMeansResult(assign, C, inertia, it, k)
