"""Top-k accuracy with micro and macro averaging, and hierarchy-grouped reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .domain import Dataset, ProbMatrix
from .errors import HeaderMismatch, KOutOfRange, MissingObservation
from .fusion import true_class_rank

AVERAGINGS = ("micro", "macro")


def _aligned(probs: ProbMatrix, truth: Dataset) -> np.ndarray:
    if probs.classes != truth.vocabulary.classes:
        raise HeaderMismatch("probability header differs from the truth vocabulary")
    rows = probs.row_index()
    order = []
    for o in truth.observations:
        if o.obs_id not in rows:
            raise MissingObservation(o.obs_id, "probabilities")
        order.append(rows[o.obs_id])
    return probs.values[order]


def hits_at_k(P, y, k: int) -> np.ndarray:
    if not 1 <= k <= P.shape[1]:
        raise KOutOfRange(f"k={k} outside 1..{P.shape[1]}")
    return true_class_rank(P, y) < k


def accuracy_from_arrays(P, y, k: int, averaging: str, n_classes: int | None = None) -> float:
    """Top-k accuracy on raw arrays; macro averages classes present in ``y``."""
    P = np.asarray(P, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    hit = hits_at_k(P, y, k)
    if averaging == "micro":
        return float(hit.sum() / len(y))
    if averaging == "macro":
        n_classes = n_classes or P.shape[1]
        counts = np.bincount(y, minlength=n_classes)
        correct = np.bincount(y, weights=hit, minlength=n_classes)
        present = counts > 0
        return float(np.mean(correct[present] / counts[present]))
    raise ValueError(f"averaging must be one of {AVERAGINGS}")


def topk_accuracy(probs: ProbMatrix, truth: Dataset, k: int, averaging: str = "micro") -> float:
    return accuracy_from_arrays(_aligned(probs, truth), truth.labels(), k, averaging)


@dataclass
class EvalReport:
    ks: list[int]
    averagings: list[str]
    cells: dict[tuple[int, str], float]
    n_observations: int
    per_class: list[dict]
    excluded_classes: list[str]
    groups: dict[str, list[dict]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "n_observations": self.n_observations,
            "accuracy": [
                {"k": k, "averaging": a, "value": self.cells[(k, a)]}
                for k in self.ks
                for a in self.averagings
            ],
            "classes_evaluated": len(self.per_class) - len(self.excluded_classes),
            "excluded_from_macro": self.excluded_classes,
            "per_class": self.per_class,
            "groups": self.groups,
        }

    def to_text(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def per_class_csv(self) -> str:
        buf = io.StringIO()
        cols = ["label", "label_l2", "label_l1", "n"] + [f"top{k}" for k in self.ks]
        writer = csv.DictWriter(buf, fieldnames=cols, lineterminator="\n")
        writer.writeheader()
        for row in self.per_class:
            writer.writerow({c: ("" if row[c] is None else row[c]) for c in cols})
        return buf.getvalue()


def eval_report(probs: ProbMatrix, truth: Dataset, ks=(1, 3), averagings=AVERAGINGS) -> EvalReport:
    """Every requested (k, averaging) cell, per-class top-k rows, and the same
    rows aggregated to level-2 and level-1 groups (report only)."""
    P = _aligned(probs, truth)
    y = truth.labels()
    C = len(truth.vocabulary)
    ks = [int(k) for k in ks]
    counts = np.bincount(y, minlength=C)
    cells, correct = {}, {}
    for k in ks:
        hit = hits_at_k(P, y, k)
        correct[k] = np.bincount(y, weights=hit, minlength=C).astype(np.int64)
        for a in averagings:
            cells[(k, a)] = accuracy_from_arrays(P, y, k, a, C)

    hierarchy = truth.hierarchy
    per_class, excluded = [], []
    for c, label in enumerate(truth.vocabulary.classes):
        l2, l1 = hierarchy.lineage(label) if label in hierarchy.parent_of else (None, None)
        row = {"label": label, "label_l2": l2, "label_l1": l1, "n": int(counts[c])}
        for k in ks:
            row[f"top{k}"] = float(correct[k][c] / counts[c]) if counts[c] else None
        if counts[c] == 0:
            excluded.append(label)
        per_class.append(row)

    groups = {}
    for level in ("label_l2", "label_l1"):
        agg: dict[str, dict] = {}
        for c, row in enumerate(per_class):
            if row[level] is None:
                continue
            g = agg.setdefault(row[level], {"group": row[level], "n": 0, **{f"_c{k}": 0 for k in ks}})
            g["n"] += int(counts[c])
            for k in ks:
                g[f"_c{k}"] += int(correct[k][c])
        rows = []
        for name in sorted(agg):
            g = agg[name]
            out = {"group": name, "n": g["n"]}
            for k in ks:
                out[f"top{k}"] = g[f"_c{k}"] / g["n"] if g["n"] else None
            rows.append(out)
        groups[level] = rows

    return EvalReport(ks, list(averagings), cells, len(y), per_class, excluded, groups)
