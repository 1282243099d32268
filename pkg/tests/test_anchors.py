"""Anchor clustering under the overlap metric."""

import itertools

import numpy as np
import pytest

from adk.anchors import anchor_fitness, kmeans_anchors, pairwise_iou_wh


def random_boxes(rng, n, lo=2.0, hi=300.0):
    return rng.uniform(lo, hi, size=(n, 2))


class TestPairwiseIou:
    def test_identity(self):
        boxes = np.array([[10.0, 10.0], [20.0, 40.0]])
        m = pairwise_iou_wh(boxes, boxes)
        assert np.allclose(np.diag(m), 1.0)

    def test_nested_squares(self):
        m = pairwise_iou_wh(np.array([[10.0, 10.0]]), np.array([[20.0, 20.0]]))
        assert m[0, 0] == pytest.approx(0.25)

    def test_disjoint_aspect(self):
        # (10,40) vs (40,10): inter 100, union 400+400-100
        m = pairwise_iou_wh(np.array([[10.0, 40.0]]), np.array([[40.0, 10.0]]))
        assert m[0, 0] == pytest.approx(100.0 / 700.0)

    def test_range_and_symmetry(self):
        rng = np.random.default_rng(80)
        a = random_boxes(rng, 30)
        b = random_boxes(rng, 20)
        m = pairwise_iou_wh(a, b)
        assert m.shape == (30, 20)
        assert (m > 0).all() and (m <= 1).all()
        assert np.allclose(m, pairwise_iou_wh(b, a).T)


class TestAnchorFitness:
    def test_exact_cover(self):
        boxes = np.array([[10.0, 10.0], [50.0, 20.0], [10.0, 10.0]])
        assert anchor_fitness(boxes, np.array([[10.0, 10.0], [50.0, 20.0]])) == 1.0

    def test_single_anchor_average(self):
        boxes = np.array([[10.0, 10.0], [20.0, 20.0]])
        assert anchor_fitness(boxes, np.array([[10.0, 10.0]])) == pytest.approx(0.625)

    def test_empty_inputs_rejected(self):
        with pytest.raises(ValueError):
            anchor_fitness(np.array([[10.0, 10.0]]), np.empty((0, 2)))
        with pytest.raises(ValueError):
            anchor_fitness(np.empty((0, 2)), np.array([[10.0, 10.0]]))


class TestKmeansAnchors:
    def test_degenerate_single_cluster(self):
        boxes = np.full((25, 2), 10.0)
        res = kmeans_anchors(boxes, 1, seed=0)
        assert np.allclose(res.anchors, [[10.0, 10.0]])
        assert res.fitness == 1.0

    def test_two_cluster_recovery(self):
        boxes = np.concatenate([np.full((50, 2), 10.0), np.full((50, 2), 100.0)])
        res = kmeans_anchors(boxes, 2, seed=0)
        assert np.allclose(res.anchors, [[10.0, 10.0], [100.0, 100.0]])
        assert res.fitness == 1.0

    def test_two_cluster_is_global_optimum(self):
        """No other center pair drawn from the data beats the recovered one."""
        boxes = np.concatenate([np.full((50, 2), 10.0), np.full((50, 2), 100.0)])
        res = kmeans_anchors(boxes, 2, seed=0)
        best = (1.0 - pairwise_iou_wh(boxes, res.anchors).max(axis=1)).sum()
        shapes = np.array([[10.0, 10.0], [100.0, 100.0], [55.0, 55.0], [10.0, 100.0]])
        for i, j in itertools.combinations(range(len(shapes)), 2):
            cand = shapes[[i, j]]
            cost = (1.0 - pairwise_iou_wh(boxes, cand).max(axis=1)).sum()
            assert best <= cost + 1e-12

    def test_anchor_count_and_order(self):
        rng = np.random.default_rng(81)
        res = kmeans_anchors(random_boxes(rng, 400), 9, seed=1)
        assert res.anchors.shape == (9, 2)
        areas = res.anchors[:, 0] * res.anchors[:, 1]
        assert (np.diff(areas) >= 0).all()

    def test_cost_history_monotone(self):
        rng = np.random.default_rng(82)
        for trial in range(100):
            boxes = random_boxes(rng, int(rng.integers(20, 120)))
            k = int(rng.integers(1, 10))
            res = kmeans_anchors(boxes, k, seed=trial)
            hist = np.array(res.cost_history)
            assert len(hist) == res.iterations
            assert (np.diff(hist) <= 1e-9).all()

    def test_deterministic(self):
        rng = np.random.default_rng(83)
        boxes = random_boxes(rng, 200)
        a = kmeans_anchors(boxes, 5, seed=11)
        b = kmeans_anchors(boxes, 5, seed=11)
        assert np.array_equal(a.anchors, b.anchors)
        assert a.cost_history == b.cost_history

    def test_scale_invariance(self):
        rng = np.random.default_rng(84)
        boxes = random_boxes(rng, 150)
        base = kmeans_anchors(boxes, 4, seed=2)
        scaled = kmeans_anchors(boxes * 3.0, 4, seed=2)
        assert np.allclose(scaled.anchors, base.anchors * 3.0)
        assert scaled.fitness == pytest.approx(base.fitness)

    def test_perfect_fit_at_distinct_shapes(self):
        rng = np.random.default_rng(85)
        shapes = random_boxes(rng, 6)
        boxes = shapes[rng.integers(0, 6, size=200)]
        res = kmeans_anchors(boxes, 6, seed=3)
        assert res.fitness == pytest.approx(1.0)

    def test_euclidean_metric_supported(self):
        boxes = np.concatenate([np.full((30, 2), 10.0), np.full((30, 2), 100.0)])
        res = kmeans_anchors(boxes, 2, seed=0, metric="euclidean")
        assert np.allclose(res.anchors, [[10.0, 10.0], [100.0, 100.0]])

    def test_input_validation(self):
        with pytest.raises(ValueError):
            kmeans_anchors(np.array([[1.0, 2.0, 3.0]]), 1)
        with pytest.raises(ValueError):
            kmeans_anchors(np.array([[0.0, 5.0]]), 1)
        with pytest.raises(ValueError):
            kmeans_anchors(np.array([[np.inf, 5.0]]), 1)
        with pytest.raises(ValueError):
            kmeans_anchors(np.array([[5.0, 5.0]]), 1, metric="cosine")

    def test_k_bounded_by_distinct_shapes(self):
        # five boxes but only one distinct shape
        boxes = np.full((5, 2), 10.0)
        with pytest.raises(ValueError, match="distinct"):
            kmeans_anchors(boxes, 2, seed=0)
        with pytest.raises(ValueError):
            kmeans_anchors(boxes, 0, seed=0)
