"""Prototype classifier, softmax probabilities, k-means, label blending."""

from __future__ import annotations

import mpmath
import numpy as np
import pytest

from cdem.errors import ConfigError, DataError
from cdem.prototype import (
    class_probabilities,
    combined_pseudo_labels,
    fit_prototypes,
    nearest_center_labels,
    present_class_centers,
    target_kmeans,
)


def test_fit_prototypes_fixed_example():
    z = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
    y = np.array([0, 0, 1])
    protos = fit_prototypes(z, y, 2)
    assert np.allclose(protos.centers[0], [1.0, 0.0])
    assert np.allclose(protos.centers[1], [0.0, 2.0])
    assert np.allclose(protos.complement_centers[0], [0.0, 2.0])
    assert np.allclose(protos.complement_centers[1], [1.0, 0.0])
    assert protos.counts.tolist() == [2, 1]


def test_fit_prototypes_missing_class_rejected():
    with pytest.raises(DataError):
        fit_prototypes(np.zeros((3, 2)), np.array([0, 0, 0]), 2)


def test_probabilities_row_stochastic_and_ordered():
    rng = np.random.default_rng(21)
    centers = rng.standard_normal((4, 3))
    z = rng.standard_normal((50, 3))
    p = class_probabilities(centers, z)
    assert np.abs(p.sum(axis=1) - 1.0).max() <= 1e-9
    assert (p > 0).all()
    # softmax over negative distance is monotone: argmax == nearest center
    assert np.array_equal(np.argmax(p, axis=1), nearest_center_labels(centers, z))


def test_probabilities_equidistant_uniform():
    centers = np.array([[1.0, 0.0], [-1.0, 0.0]])
    p = class_probabilities(centers, np.array([[0.0, 5.0]]))
    assert np.allclose(p, [[0.5, 0.5]], atol=1e-12)


def test_probabilities_match_high_precision_reference():
    # distances fed through exp at 50 digits, no max-shift trick
    rng = np.random.default_rng(22)
    centers = rng.standard_normal((3, 4))
    z = rng.standard_normal((6, 4))
    p = class_probabilities(centers, z)
    mpmath.mp.dps = 50
    for i in range(z.shape[0]):
        dists = [mpmath.mpf(float(np.linalg.norm(z[i] - c))) for c in centers]
        weights = [mpmath.exp(-d) for d in dists]
        total = sum(weights)
        for j in range(3):
            ref = float(weights[j] / total)
            assert abs(p[i, j] - ref) <= 1e-12


def test_probabilities_overflow_safe():
    centers = np.array([[1e6, 0.0], [-1e6, 0.0]])
    p = class_probabilities(centers, np.array([[1e6, 1.0]]))
    assert np.isfinite(p).all()
    assert p[0, 0] > 0.999999


def test_kmeans_converges_immediately_on_true_centers():
    rng = np.random.default_rng(23)
    centers = np.array([[5.0, 0.0], [-5.0, 0.0]])
    z = np.vstack(
        [centers[0] + 0.1 * rng.standard_normal((20, 2)),
         centers[1] + 0.1 * rng.standard_normal((20, 2))]
    )
    protos, assign, history = target_kmeans(z, centers)
    assert assign[:20].tolist() == [0] * 20 and assign[20:].tolist() == [1] * 20
    assert len(history) <= 3
    assert np.allclose(protos.centers[0], z[:20].mean(axis=0))


def test_kmeans_sse_non_increasing():
    rng = np.random.default_rng(24)
    z = rng.standard_normal((80, 3))
    init = rng.standard_normal((4, 3))
    _, _, history = target_kmeans(z, init)
    assert (np.diff(history) <= 1e-9).all()


def test_kmeans_empty_cluster_keeps_previous_center():
    z = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    far = np.array([100.0, 100.0])
    protos, assign, _ = target_kmeans(z, np.vstack([[0.0, 0.0], far]))
    assert assign.tolist() == [0, 0, 0]
    assert np.allclose(protos.centers[1], far)
    assert protos.counts.tolist() == [3, 0]
    assert protos.complement_centers is None


def test_kmeans_single_cluster_is_global_mean():
    rng = np.random.default_rng(25)
    z = rng.standard_normal((12, 2))
    protos, assign, _ = target_kmeans(z, z[:1])
    assert np.allclose(protos.centers[0], z.mean(axis=0))
    assert (assign == 0).all()


def test_kmeans_validation():
    z = np.zeros((3, 2))
    with pytest.raises(ConfigError):
        target_kmeans(z, np.zeros((2, 3)))
    with pytest.raises(DataError):
        target_kmeans(z, np.zeros((4, 2)))


def test_combined_fixed_example():
    p = combined_pseudo_labels(
        np.array([[0.9, 0.1]]), np.array([[0.2, 0.8]]), 3, 11
    )
    assert np.abs(p.p - np.array([[0.70909090909090905, 0.29090909090909089]])).max() <= 1e-12
    assert p.label.tolist() == [0]
    assert p.label_source.tolist() == [0] and p.label_target.tolist() == [1]
    assert p.consistent.tolist() == [False]
    assert not p.selected.any()


def test_combined_final_step_is_target_only():
    rng = np.random.default_rng(26)
    ps = rng.dirichlet(np.ones(3), size=10)
    pt = rng.dirichlet(np.ones(3), size=10)
    table = combined_pseudo_labels(ps, pt, 11, 11)
    assert np.array_equal(table.p, pt)
    assert np.array_equal(table.label, np.argmax(pt, axis=1))


def test_combined_rows_sum_to_one():
    rng = np.random.default_rng(27)
    ps = rng.dirichlet(np.ones(4), size=30)
    pt = rng.dirichlet(np.ones(4), size=30)
    for step in (1, 5, 11):
        table = combined_pseudo_labels(ps, pt, step, 11)
        assert np.abs(table.p.sum(axis=1) - 1.0).max() <= 1e-9
        assert np.array_equal(table.consistent, table.label_source == table.label_target)
        assert np.allclose(table.confidence, table.p.max(axis=1))


def test_combined_validation():
    ps = np.ones((2, 2)) / 2
    with pytest.raises(ConfigError):
        combined_pseudo_labels(ps, ps, 0, 11)
    with pytest.raises(ConfigError):
        combined_pseudo_labels(ps, ps, 12, 11)
    with pytest.raises(DataError):
        combined_pseudo_labels(ps, np.ones((3, 2)) / 2, 1, 11)


def test_present_class_centers_subset():
    z = np.array([[0.0], [1.0], [4.0]])
    centers, classes = present_class_centers(z, np.array([2, 2, 0]), 3)
    assert classes.tolist() == [0, 2]
    assert np.allclose(centers, [[4.0], [0.5]])
