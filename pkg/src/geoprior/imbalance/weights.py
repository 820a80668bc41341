"""Class counts, per-class loss weights and the weighted index sampler."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..errors import AllEmpty, AllZeroWeights

SCHEMES = ("inverse", "inverse_log")


@dataclass(frozen=True)
class ClassCounts:
    counts: tuple[int, ...]

    @classmethod
    def from_labels(cls, labels, n_classes: int) -> "ClassCounts":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(tuple(int(c) for c in np.bincount(labels, minlength=n_classes)[:n_classes]))

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, c):
        return self.counts[c]

    @property
    def n_max(self) -> int:
        return max(self.counts, default=0)

    @property
    def n_total(self) -> int:
        return sum(self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)

    def cumulative_share(self) -> np.ndarray:
        """Cumulative fraction of observations over classes sorted by size.

        Linear (a straight line from 1/C to 1) exactly when all classes are
        the same size.
        """
        ordered = np.sort(self.as_array())[::-1]
        return np.cumsum(ordered) / max(self.n_total, 1)

    def is_balanced(self) -> bool:
        return len(set(self.counts)) <= 1


def class_counts(dataset) -> ClassCounts:
    return ClassCounts.from_labels(dataset.labels(), len(dataset.vocabulary))


def class_weights(counts: ClassCounts, scheme: str = "inverse", cap: float | None = None) -> np.ndarray:
    """Per-class loss weights.

    ``inverse`` gives n_max / n_c, so with counts {0: 50, 1: 1} one example
    of class 1 weighs as much as 50 of class 0. ``inverse_log`` gives
    1 / ln(e + n_c). Absent classes get 0; ``cap`` is applied last.
    """
    n = counts.as_array().astype(np.float64)
    if counts.n_max == 0:
        raise AllEmpty("every class is empty")
    present = n > 0
    w = np.zeros_like(n)
    if scheme == "inverse":
        w[present] = counts.n_max / n[present]
    elif scheme == "inverse_log":
        w[present] = 1.0 / np.log(math.e + n[present])
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}; expected one of {SCHEMES}")
    if cap is not None:
        w = np.minimum(w, cap)
    return w


def weighted_sampler(weights, n_draws: int, seed) -> np.ndarray:
    """Draw ``n_draws`` i.i.d. indices with probability proportional to weight."""
    w = np.asarray(weights, dtype=np.float64)
    if w.ndim != 1 or np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be a finite, non-negative vector")
    if w.sum() <= 0:
        raise AllZeroWeights("all sampling weights are zero")
    cdf = np.cumsum(w)
    cdf /= cdf[-1]
    u = np.random.default_rng(seed).random(n_draws)
    idx = np.searchsorted(cdf, u, side="right")
    # u can only land past the end through rounding; send it to the last live index
    return np.minimum(idx, np.flatnonzero(w > 0)[-1])
