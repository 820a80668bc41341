"""Hard triplet mining and the class rectification loss (CRL).

CRL mixes cross-entropy and a triplet hinge per class:

    L = mean_i (1 - a[y_i]) * CE_i  +  mean_t a[y_anchor] * max(0, d(a,p) - d(a,n) + margin)

where ``a`` grows with how under-represented a class is.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .weights import ClassCounts


class Triplet(NamedTuple):
    anchor: int
    positive: int
    negative: int


def pairwise_distances(E) -> np.ndarray:
    E = np.asarray(E, dtype=np.float64)
    diff = E[:, None, :] - E[None, :, :]
    return np.sqrt((diff**2).sum(axis=-1))


def hard_mine_triplets(embeddings, labels, minority) -> list[Triplet]:
    """One triplet per minority anchor: its farthest same-class sample and its
    nearest other-class sample. Ties go to the lower batch index."""
    labels = np.asarray(labels)
    if len(labels) < 2:
        return []
    D = pairwise_distances(embeddings)
    minority = set(int(c) for c in minority)
    triplets = []
    for i, c in enumerate(labels):
        if int(c) not in minority:
            continue
        same = labels == c
        same[i] = False
        other = labels != c
        if not same.any() or not other.any():
            continue
        pos = int(np.argmax(np.where(same, D[i], -np.inf)))
        neg = int(np.argmin(np.where(other, D[i], np.inf)))
        triplets.append(Triplet(i, pos, neg))
    return triplets


def alpha_schedule(counts: ClassCounts, eta: float = 0.5) -> np.ndarray:
    n = counts.as_array().astype(np.float64)
    if counts.n_max == 0:
        return np.zeros_like(n)
    return np.clip(eta * (1.0 - n / counts.n_max), 0.0, 1.0)


def minority_classes(counts: ClassCounts) -> frozenset[int]:
    """Smallest non-empty classes that together hold at most half the data."""
    order = sorted((n, c) for c, n in enumerate(counts.counts) if n > 0)
    chosen, running = [], 0
    for n, c in order:
        if running + n > counts.n_total / 2:
            break
        running += n
        chosen.append(c)
    return frozenset(chosen)


def _log_softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))


def crl_loss_and_grads(logits, embeddings, labels, triplets, alpha, margin: float = 0.2):
    """Loss plus gradients with respect to logits and embeddings."""
    logits = np.asarray(logits, dtype=np.float64)
    E = np.asarray(embeddings, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    alpha = np.asarray(alpha, dtype=np.float64)
    if np.any(alpha < 0) or np.any(alpha > 1):
        raise ValueError("alpha values must lie in [0, 1]")
    n = len(labels)
    rows = np.arange(n)

    logp = _log_softmax(logits)
    ce = -logp[rows, labels]
    keep = 1.0 - alpha[labels]
    loss = float((keep * ce).mean())
    dlogits = np.exp(logp)
    dlogits[rows, labels] -= 1.0
    dlogits *= (keep / n)[:, None]

    dE = np.zeros_like(E)
    if triplets:
        scale = 1.0 / len(triplets)
        hinge_sum = 0.0
        for a, p, q in triplets:
            w = alpha[labels[a]]
            d_ap = np.linalg.norm(E[a] - E[p])
            d_an = np.linalg.norm(E[a] - E[q])
            h = d_ap - d_an + margin
            if h <= 0:
                continue
            hinge_sum += w * h
            if w == 0:
                continue
            if d_ap > 0:
                g = w * scale * (E[a] - E[p]) / d_ap
                dE[a] += g
                dE[p] -= g
            if d_an > 0:
                g = w * scale * (E[a] - E[q]) / d_an
                dE[a] -= g
                dE[q] += g
        loss += hinge_sum * scale
    return loss, dlogits, dE


def crl_loss(logits, embeddings, labels, triplets, alpha, margin: float = 0.2) -> float:
    return crl_loss_and_grads(logits, embeddings, labels, triplets, alpha, margin)[0]
