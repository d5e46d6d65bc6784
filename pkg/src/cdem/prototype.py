"""Nearest-class-mean classification and target-side clustering.

Class probabilities come from a softmax over negative (unsquared) Euclidean
distances to the class centers, computed with the usual max-shift so the
exponentials never overflow.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class PrototypeSet:
    """Class centers in the projected space.

    centers : (C, k) per-class means
    complement_centers : (C, k) mean of all samples outside each class, or
        None when a complement is undefined (single cluster, empty cluster)
    counts : (C,) samples per class
    """

    centers: np.ndarray
    complement_centers: np.ndarray | None
    counts: np.ndarray


@dataclass
class PseudoLabelTable:
    """Per-target-sample labeling state for one curriculum step.

    p_source / p_target / p are (n_t, C) row-stochastic; p interpolates the
    two. consistent marks rows where both classifiers agree; selected is
    filled in by the curriculum and starts all False.
    """

    p_source: np.ndarray
    p_target: np.ndarray
    p: np.ndarray
    label_source: np.ndarray
    label_target: np.ndarray
    label: np.ndarray
    consistent: np.ndarray
    confidence: np.ndarray
    selected: np.ndarray

    @property
    def n_samples(self) -> int:
        return self.label.shape[0]


def fit_prototypes(features: np.ndarray, labels: np.ndarray, n_classes: int) -> PrototypeSet:
    """Per-class means and complement means; every class must be present."""
    z = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise DataError("features must be (n, k) with one label per row")
    if n_classes < 2:
        raise DataError("need at least two classes")
    if y.min() < 0 or y.max() >= n_classes:
        raise DataError(f"labels outside [0, {n_classes})")
    counts = np.bincount(y, minlength=n_classes)
    missing = np.flatnonzero(counts == 0)
    if missing.size:
        raise DataError(f"class {int(missing[0])} has no samples")
    centers = np.zeros((n_classes, z.shape[1]))
    complements = np.zeros_like(centers)
    for cls in range(n_classes):
        centers[cls] = z[y == cls].mean(axis=0)
        complements[cls] = z[y != cls].mean(axis=0)
    return PrototypeSet(centers=centers, complement_centers=complements, counts=counts)


def class_probabilities(centers: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Row-stochastic softmax over negative Euclidean distances to centers."""
    z = np.asarray(features, dtype=np.float64)
    dist = cdist(z, np.asarray(centers, dtype=np.float64))
    logits = -dist
    logits -= logits.max(axis=1, keepdims=True)
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    return p


def nearest_center_labels(centers: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Hard assignment to the closest center (ties go to the lower index)."""
    dist = cdist(np.asarray(features, dtype=np.float64), np.asarray(centers, dtype=np.float64))
    return np.argmin(dist, axis=1).astype(np.int64)


def present_class_centers(
    features: np.ndarray, labels: np.ndarray, n_classes: int
) -> tuple[np.ndarray, np.ndarray]:
    """Centers for the classes that actually occur; used by diagnostics where
    a pseudo-labeling may not cover every class."""
    z = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels, dtype=np.int64)
    present = np.flatnonzero(np.bincount(y, minlength=n_classes) > 0)
    centers = np.stack([z[y == cls].mean(axis=0) for cls in present])
    return centers, present


def target_kmeans(
    features: np.ndarray,
    init_centers: np.ndarray,
    max_iters: int = 100,
    tol: float = 1e-6,
) -> tuple[PrototypeSet, np.ndarray, list[float]]:
    """Lloyd iterations from the given centers.

    The initialization from projected source class centers is what ties
    cluster index c to class c, so no matching step is needed afterwards.
    Empty clusters keep their previous center.  Returns the final centers,
    the assignment vector, and the per-iteration sum of squared errors
    (non-increasing).
    """
    z = np.asarray(features, dtype=np.float64)
    centers = np.asarray(init_centers, dtype=np.float64).copy()
    if centers.ndim != 2 or centers.shape[1] != z.shape[1]:
        raise ConfigError("init_centers must be (C, k) matching the features")
    n_clusters = centers.shape[0]
    if n_clusters < 1 or n_clusters > z.shape[0]:
        raise DataError(f"cannot place {n_clusters} clusters on {z.shape[0]} samples")
    if max_iters < 1:
        raise ConfigError("max_iters must be at least 1")
    history: list[float] = []
    assign = np.zeros(z.shape[0], dtype=np.int64)
    prev_assign: np.ndarray | None = None
    for _ in range(max_iters):
        dist = cdist(z, centers, metric="sqeuclidean")
        assign = np.argmin(dist, axis=1).astype(np.int64)
        sse = float(dist[np.arange(z.shape[0]), assign].sum())
        history.append(sse)
        if prev_assign is not None and np.array_equal(assign, prev_assign):
            break
        if len(history) > 1 and history[-2] - sse <= tol * max(history[-2], 1e-300):
            break
        for cls in range(n_clusters):
            members = np.flatnonzero(assign == cls)
            if members.size:
                centers[cls] = z[members].mean(axis=0)
        prev_assign = assign
    counts = np.bincount(assign, minlength=n_clusters)
    complements: np.ndarray | None = None
    if n_clusters >= 2 and (counts > 0).all():
        complements = np.stack(
            [z[assign != cls].mean(axis=0) for cls in range(n_clusters)]
        )
    proto = PrototypeSet(centers=centers, complement_centers=complements, counts=counts)
    return proto, assign, history


def combined_pseudo_labels(
    p_source: np.ndarray, p_target: np.ndarray, step: int, total_steps: int
) -> PseudoLabelTable:
    """Blend the two classifiers with weight step/total_steps on the target
    side, so early steps trust the source model and the final step trusts
    target structure alone."""
    ps = np.asarray(p_source, dtype=np.float64)
    pt = np.asarray(p_target, dtype=np.float64)
    if ps.shape != pt.shape or ps.ndim != 2:
        raise DataError(f"probability tables disagree: {ps.shape} vs {pt.shape}")
    if not 1 <= step <= total_steps:
        raise ConfigError(f"step {step} outside [1, {total_steps}]")
    weight = step / total_steps
    p = (1.0 - weight) * ps + weight * pt
    label_source = np.argmax(ps, axis=1).astype(np.int64)
    label_target = np.argmax(pt, axis=1).astype(np.int64)
    label = np.argmax(p, axis=1).astype(np.int64)
    return PseudoLabelTable(
        p_source=ps,
        p_target=pt,
        p=p,
        label_source=label_source,
        label_target=label_target,
        label=label,
        consistent=label_source == label_target,
        confidence=p.max(axis=1),
        selected=np.zeros(ps.shape[0], dtype=bool),
    )
