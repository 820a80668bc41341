"""Turn an imbalance strategy name into concrete training inputs."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..errors import InvalidConfig
from .crl import alpha_schedule, minority_classes
from .resample import cluster_oversample, random_oversample, random_undersample, smote_plan
from .weights import ClassCounts, class_weights, weighted_sampler

STRATEGIES = (
    "none",
    "weights:inverse",
    "weights:inverse_log",
    "sampler:inverse",
    "sampler:inverse_log",
    "oversample",
    "undersample",
    "smote",
    "cluster",
    "crl",
)


@dataclass
class TrainingPlan:
    X: np.ndarray
    y: np.ndarray
    sample_weight: np.ndarray | None = None
    sampler: Callable[[int], np.ndarray] | None = None
    crl: object | None = None


def prepare(
    strategy: str,
    X,
    y,
    n_classes: int,
    seed: int = 0,
    *,
    weight_cap: float | None = None,
    smote_k: int = 5,
    cluster_k: int = 3,
    crl_eta: float = 0.5,
    crl_margin: float = 0.2,
) -> TrainingPlan:
    from ..geonet import CRLSettings

    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    counts = ClassCounts.from_labels(y, n_classes)

    if strategy == "none":
        return TrainingPlan(X, y)
    if strategy.startswith("weights:"):
        w = class_weights(counts, strategy.split(":", 1)[1], weight_cap)
        return TrainingPlan(X, y, sample_weight=w[y])
    if strategy.startswith("sampler:"):
        w = class_weights(counts, strategy.split(":", 1)[1], weight_cap)[y]
        return TrainingPlan(X, y, sampler=lambda epoch: weighted_sampler(w, len(y), [seed, epoch]))
    if strategy in ("oversample", "undersample", "cluster"):
        if strategy == "oversample":
            plan = random_oversample(y, n_classes, seed)
        elif strategy == "undersample":
            plan = random_undersample(y, n_classes, seed)
        else:
            plan = cluster_oversample(X, y, n_classes, cluster_k, seed)
        idx = plan.indices(len(y))
        return TrainingPlan(X[idx], y[idx])
    if strategy == "smote":
        plan = smote_plan(X, y, n_classes, smote_k, seed)
        if not plan.entries:
            return TrainingPlan(X, y)
        extra = np.array([e.features for e in plan.entries])
        extra_y = np.array([e.class_index for e in plan.entries], dtype=np.int64)
        return TrainingPlan(np.vstack([X, extra]), np.concatenate([y, extra_y]))
    if strategy == "crl":
        settings = CRLSettings(alpha_schedule(counts, crl_eta), minority_classes(counts), crl_margin)
        return TrainingPlan(X, y, crl=settings)
    raise InvalidConfig(f"unknown imbalance strategy {strategy!r}; choose from {', '.join(STRATEGIES)}")
