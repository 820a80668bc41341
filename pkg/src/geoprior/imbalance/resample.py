"""Resampling plans: random over/under-sampling, SMOTE to balance, and
cluster-based oversampling.

A plan lists what to add or keep; applying it to a dataset is the caller's
job (see the CLI ``resample`` command and :mod:`.strategy`).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .kmeans import kmeans
from .smote import smote
from .weights import ClassCounts, class_weights

KINDS = ("weights", "oversample", "undersample", "smote", "cluster")


@dataclass(frozen=True)
class PlanEntry:
    class_index: int
    source: int | None = None  # row index into the input for duplicates/keeps
    features: tuple[float, ...] | None = None  # synthetic vector (SMOTE)
    cluster: int | None = None


@dataclass
class ResamplePlan:
    """``entries`` are *additional* rows for oversample/smote/cluster and the
    *kept* rows for undersample; ``weights`` is set for the weights kind."""

    kind: str
    n_classes: int
    entries: list[PlanEntry] = field(default_factory=list)
    weights: np.ndarray | None = None
    assignments: np.ndarray | None = None  # within-class cluster of each input row
    notes: list[str] = field(default_factory=list)

    def resulting_counts(self, y) -> np.ndarray:
        y = np.asarray(y, dtype=np.int64)
        base = np.bincount(y, minlength=self.n_classes)
        added = np.bincount(
            [e.class_index for e in self.entries], minlength=self.n_classes
        ).astype(np.int64)
        if self.kind == "undersample":
            return added
        if self.kind == "weights":
            return base
        return base + added

    def indices(self, n_rows: int) -> np.ndarray:
        """Row indices of the resampled data (originals first for additive kinds)."""
        src = np.array([e.source for e in self.entries if e.source is not None], dtype=np.int64)
        if self.kind == "undersample":
            return src
        return np.concatenate([np.arange(n_rows), src])

    def to_table(self, ids=None, labels=None) -> str:
        """Tab-separated audit table: kind, class, cluster, source id or coordinates."""
        lines = ["kind\tclass\tcluster\tsource\tfeatures"]
        for note in self.notes:
            lines.insert(0, f"# {note}")
        if self.weights is not None:
            for c, w in enumerate(self.weights):
                name = labels[c] if labels is not None else str(c)
                lines.append(f"{self.kind}\t{name}\t\t\t{float(w)!r}")
        for e in self.entries:
            name = labels[e.class_index] if labels is not None else str(e.class_index)
            src = "" if e.source is None else (ids[e.source] if ids is not None else str(e.source))
            feats = "" if e.features is None else " ".join(repr(float(v)) for v in e.features)
            cl = "" if e.cluster is None else str(e.cluster)
            lines.append(f"{self.kind}\t{name}\t{cl}\t{src}\t{feats}")
        return "\n".join(lines) + "\n"


def _members(y, c):
    return np.flatnonzero(np.asarray(y) == c)


def weights_plan(y, n_classes, scheme="inverse", cap=None) -> ResamplePlan:
    counts = ClassCounts.from_labels(y, n_classes)
    return ResamplePlan("weights", n_classes, weights=class_weights(counts, scheme, cap))


def random_oversample(y, n_classes, seed=0) -> ResamplePlan:
    """Duplicate random members of each class up to the largest class size."""
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    plan = ResamplePlan("oversample", n_classes)
    for c in range(n_classes):
        members = _members(y, c)
        need = counts.max() - len(members)
        if len(members) == 0 or need == 0:
            continue
        rng = np.random.default_rng([seed, c])
        for i in rng.choice(members, size=need, replace=True):
            plan.entries.append(PlanEntry(c, source=int(i)))
    return plan


def random_undersample(y, n_classes, seed=0) -> ResamplePlan:
    """Keep a random subset of each non-empty class the size of the smallest one."""
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    n_min = counts[counts > 0].min()
    plan = ResamplePlan("undersample", n_classes)
    for c in range(n_classes):
        members = _members(y, c)
        if len(members) == 0:
            continue
        rng = np.random.default_rng([seed, c])
        keep = np.sort(rng.choice(members, size=n_min, replace=False))
        plan.entries.extend(PlanEntry(c, source=int(i)) for i in keep)
    return plan


def smote_plan(X, y, n_classes, k=5, seed=0) -> ResamplePlan:
    """SMOTE every smaller class up to the largest class size."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    counts = np.bincount(y, minlength=n_classes)
    plan = ResamplePlan("smote", n_classes)
    for c in range(n_classes):
        members = _members(y, c)
        need = int(counts.max() - len(members))
        if len(members) == 0 or need == 0:
            continue
        res = smote(X[members], need, k=k, seed=seed + c)
        for p in res.points:
            plan.entries.append(PlanEntry(c, features=tuple(float(v) for v in p)))
        if len(members) == 1:
            plan.notes.append(f"class {c}: single sample, SMOTE emitted copies")
    return plan


def _spread(total, sizes):
    """Split ``total`` over clusters as evenly as possible; the remainder goes
    to the originally largest clusters first (ties: lower cluster id)."""
    k = len(sizes)
    target = np.full(k, total // k, dtype=np.int64)
    order = sorted(range(k), key=lambda j: (-sizes[j], j))
    for j in order[: total % k]:
        target[j] += 1
    return target


def cluster_oversample(X, y, n_classes, k_per_class=3, seed=0) -> ResamplePlan:
    """Cluster-based oversampling.

    Each class is clustered with k-means (k clamped to its distinct points);
    every cluster is grown to the class's largest cluster, and each class is
    then grown to the common target T, the largest class total after that
    first step. Within a class, T is spread evenly over clusters using
    :func:`_spread`. Duplicates cycle through a seeded shuffle of the cluster.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    plan = ResamplePlan("cluster", n_classes, assignments=np.full(len(y), -1, dtype=np.int64))
    per_class = {}
    for c in range(n_classes):
        members = _members(y, c)
        if len(members) == 0:
            continue
        km = kmeans(X[members], k_per_class, seed=seed + c)
        labels = np.unique(km.assignments, return_inverse=True)[1]  # drop empty clusters
        if km.clamped or labels.max() + 1 < km.k:
            plan.notes.append(f"class {c}: k clamped from {k_per_class} to {labels.max() + 1}")
        sizes = np.bincount(labels)
        plan.assignments[members] = labels
        per_class[c] = (members, labels, sizes)

    target = max(len(sizes) * sizes.max() for _, _, sizes in per_class.values())
    for c, (members, labels, sizes) in per_class.items():
        goal = _spread(target, list(sizes))
        for j, size in enumerate(sizes):
            cluster_members = members[labels == j]
            rng = np.random.default_rng([seed, c, j])
            cycle = rng.permutation(cluster_members)
            for t in range(goal[j] - size):
                plan.entries.append(PlanEntry(c, source=int(cycle[t % size]), cluster=j))
    plan.notes.append(f"target per class: {target}")
    return plan



def cluster_totals(plan: ResamplePlan, y) -> dict[int, np.ndarray]:
    """Per-class arrays of per-cluster row counts after applying a cluster plan."""
    y = np.asarray(y, dtype=np.int64)
    totals = {}
    for c in range(plan.n_classes):
        members = _members(y, c)
        if len(members) == 0:
            continue
        own = plan.assignments[members]
        counts = np.bincount(own, minlength=own.max() + 1)
        for e in plan.entries:
            if e.class_index == c:
                counts[e.cluster] += 1
        totals[c] = counts
    return totals
