"""Fuse image-model and geo-prior probabilities by elementwise product.

With image I and context x conditionally independent given the class,
P(y | I, x) is proportional to P(y | I) * P(y | x). Zeros are floored at
``epsilon`` first and the product is taken in log space.
"""

from __future__ import annotations

import numpy as np

from .domain import ClassVocabulary, ProbMatrix
from .errors import HeaderMismatch, KOutOfRange, LengthMismatch, MissingObservation

DEFAULT_EPSILON = 1e-12


def _fuse_rows(p_image, p_geo, epsilon):
    # renormalize first so the floor does not depend on how an input was scaled
    p_image = p_image / p_image.sum(axis=-1, keepdims=True)
    p_geo = p_geo / p_geo.sum(axis=-1, keepdims=True)
    log_sum = np.log(np.maximum(p_image, epsilon)) + np.log(np.maximum(p_geo, epsilon))
    log_sum -= log_sum.max(axis=-1, keepdims=True)
    out = np.exp(log_sum)
    return out / out.sum(axis=-1, keepdims=True)


def fuse_posteriors(
    p_image,
    p_geo,
    epsilon: float = DEFAULT_EPSILON,
    vocab_image: ClassVocabulary | None = None,
    vocab_geo: ClassVocabulary | None = None,
) -> np.ndarray:
    p_image = np.asarray(p_image, dtype=np.float64)
    p_geo = np.asarray(p_geo, dtype=np.float64)
    if p_image.shape != p_geo.shape:
        raise LengthMismatch(f"cannot fuse vectors of shape {p_image.shape} and {p_geo.shape}")
    if vocab_image is not None and vocab_geo is not None:
        vocab_image.require_same(vocab_geo, "image vs geo probabilities")
    return _fuse_rows(p_image, p_geo, epsilon)


def top_k(p, k: int) -> np.ndarray:
    """Indices of the k largest entries, descending; ties go to the lower index."""
    p = np.asarray(p, dtype=np.float64)
    if not 1 <= k <= p.shape[-1]:
        raise KOutOfRange(f"k={k} outside 1..{p.shape[-1]}")
    return np.argsort(-p, axis=-1, kind="stable")[..., :k]


def top_k_labels(p, k: int, vocabulary: ClassVocabulary) -> list[str]:
    return [vocabulary.classes[i] for i in top_k(p, k)]


def true_class_rank(P, y) -> np.ndarray:
    """0-based rank of each row's true class under the top_k tie rule."""
    P = np.asarray(P, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    rows = np.arange(len(y))
    p_true = P[rows, y][:, None]
    cols = np.arange(P.shape[1])[None, :]
    ahead = (P > p_true) | ((P == p_true) & (cols < y[:, None]))
    return ahead.sum(axis=1)


def align(image: ProbMatrix, geo: ProbMatrix) -> np.ndarray:
    """Geo rows reordered to follow the image file's obs_id order."""
    if image.classes != geo.classes:
        raise HeaderMismatch("image and geo probability files have different class headers")
    geo_rows = geo.row_index()
    image_ids = set(image.obs_ids)
    for oid in image.obs_ids:
        if oid not in geo_rows:
            raise MissingObservation(oid, "geo probabilities")
    for oid in geo.obs_ids:
        if oid not in image_ids:
            raise MissingObservation(oid, "image probabilities")
    return geo.values[[geo_rows[o] for o in image.obs_ids]]


def fuse_file(image: ProbMatrix, geo: ProbMatrix, epsilon: float = DEFAULT_EPSILON) -> ProbMatrix:
    image.validate()
    geo.validate()
    fused = _fuse_rows(image.values, align(image, geo), epsilon)
    return ProbMatrix(image.obs_ids, image.classes, fused)
