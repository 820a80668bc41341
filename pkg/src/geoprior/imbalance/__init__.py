"""Class-imbalance tools: weights, samplers, SMOTE, k-means, cluster
oversampling, hard triplet mining with class rectification loss, MixUp."""

from .augment import mixup, mixup_batch
from .crl import Triplet, alpha_schedule, crl_loss, crl_loss_and_grads, hard_mine_triplets, minority_classes
from .kmeans import KMeansResult, kmeans
from .resample import (
    PlanEntry,
    ResamplePlan,
    cluster_oversample,
    cluster_totals,
    random_oversample,
    random_undersample,
    smote_plan,
    weights_plan,
)
from .smote import SmoteResult, nearest_neighbors, smote
from .strategy import STRATEGIES, prepare
from .weights import ClassCounts, class_counts, class_weights, weighted_sampler

__all__ = [
    "ClassCounts",
    "KMeansResult",
    "PlanEntry",
    "ResamplePlan",
    "STRATEGIES",
    "SmoteResult",
    "Triplet",
    "alpha_schedule",
    "class_counts",
    "class_weights",
    "cluster_oversample",
    "cluster_totals",
    "crl_loss",
    "crl_loss_and_grads",
    "hard_mine_triplets",
    "kmeans",
    "minority_classes",
    "mixup",
    "mixup_batch",
    "nearest_neighbors",
    "prepare",
    "random_oversample",
    "random_undersample",
    "smote",
    "smote_plan",
    "weighted_sampler",
    "weights_plan",
]
