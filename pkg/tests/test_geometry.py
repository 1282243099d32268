"""Core box/annotation model: construction rules, IoU, coordinate
conversions and size classes."""

import math

import numpy as np
import pytest

from adk.geometry import (
    Annotation,
    BBox,
    DatasetManifest,
    Detection,
    ImageRecord,
    NormBBox,
    SizeClass,
    SizeThresholds,
    Source,
    Split,
    Status,
    from_normalized,
    iou,
    size_class,
    to_normalized,
)


def random_box(rng, extent=100.0):
    x1, x2 = sorted(rng.uniform(0, extent, size=2))
    y1, y2 = sorted(rng.uniform(0, extent, size=2))
    return BBox(x1, y1, x2, y2)


class TestBBox:
    def test_accessors(self):
        b = BBox(1.0, 2.0, 4.0, 8.0)
        assert b.width == 3.0
        assert b.height == 6.0
        assert b.area == 18.0
        assert b.as_tuple() == (1.0, 2.0, 4.0, 8.0)

    def test_degenerate_is_allowed(self):
        assert BBox(5, 5, 5, 5).area == 0.0

    def test_inverted_corners_rejected(self):
        with pytest.raises(ValueError):
            BBox(4, 0, 1, 2)
        with pytest.raises(ValueError):
            BBox(0, 4, 2, 1)

    def test_non_finite_rejected(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError):
                BBox(0, 0, bad, 1)

    def test_translate(self):
        assert BBox(1, 2, 3, 4).translate(10, -2) == BBox(11, 0, 13, 2)

    def test_clip_inside_and_partial(self):
        b = BBox(-5, -5, 10, 10)
        assert b.clip(0, 0, 20, 20) == BBox(0, 0, 10, 10)
        assert BBox(2, 2, 4, 4).clip(0, 0, 10, 10) == BBox(2, 2, 4, 4)

    def test_clip_empty_is_none(self):
        assert BBox(0, 0, 1, 1).clip(5, 5, 9, 9) is None
        # touching edges share zero area
        assert BBox(0, 0, 5, 5).clip(5, 0, 9, 5) is None


class TestIou:
    def test_identical_boxes(self):
        b = BBox(3, 4, 10, 12)
        assert iou(b, b) == 1.0

    def test_disjoint(self):
        assert iou(BBox(0, 0, 1, 1), BBox(2, 2, 3, 3)) == 0.0

    def test_half_overlap(self):
        # two 2x2 boxes sharing a 1x2 strip: 2 / (4 + 4 - 2)
        assert iou(BBox(0, 0, 2, 2), BBox(1, 0, 3, 2)) == pytest.approx(1 / 3)

    def test_contained(self):
        assert iou(BBox(0, 0, 10, 10), BBox(0, 0, 5, 5)) == pytest.approx(0.25)

    def test_degenerate_box_matches_nothing(self):
        point = BBox(5, 5, 5, 5)
        assert iou(point, point) == 0.0
        assert iou(point, BBox(0, 0, 10, 10)) == 0.0

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(11)
        for _ in range(500):
            a, b = random_box(rng), random_box(rng)
            v = iou(a, b)
            assert v == iou(b, a)
            assert 0.0 <= v <= 1.0

    def test_agrees_with_area_arithmetic(self):
        rng = np.random.default_rng(12)
        for _ in range(200):
            a, b = random_box(rng), random_box(rng)
            inter = a.clip(*b.as_tuple())
            expected = 0.0
            if inter is not None and a.area + b.area - inter.area > 0:
                expected = inter.area / (a.area + b.area - inter.area)
            assert iou(a, b) == pytest.approx(expected, abs=1e-12)


class TestNormalization:
    def test_round_trip(self):
        rng = np.random.default_rng(21)
        for _ in range(500):
            b = random_box(rng, extent=640.0)
            clipped = b.clip(0, 0, 640, 480)
            if clipped is None:
                continue
            back = from_normalized(to_normalized(b, 640, 480), 640, 480)
            np.testing.assert_allclose(back.as_tuple(), clipped.as_tuple(), atol=1e-9)

    def test_clips_before_normalizing(self):
        nb = to_normalized(BBox(-10, -10, 20, 20), 100, 100)
        assert nb.cx == pytest.approx(0.1)
        assert nb.w == pytest.approx(0.2)

    def test_fully_outside_raises(self):
        with pytest.raises(ValueError):
            to_normalized(BBox(200, 200, 300, 300), 100, 100)

    def test_norm_bbox_bounds_enforced(self):
        with pytest.raises(ValueError):
            NormBBox(1.5, 0.5, 0.1, 0.1)
        with pytest.raises(ValueError):
            NormBBox(0.5, 0.5, -0.1, 0.1)

    def test_tiny_image_guard(self):
        with pytest.raises(ValueError):
            to_normalized(BBox(0, 0, 1, 1), 0, 10)


class TestSizeClasses:
    def test_default_cutoffs_inclusive(self):
        # 32*32 = 1024 still small, 96*96 = 9216 still medium
        assert size_class(BBox(0, 0, 32, 32)) is SizeClass.S
        assert size_class(BBox(0, 0, 32, 32.001)) is SizeClass.M
        assert size_class(BBox(0, 0, 96, 96)) is SizeClass.M
        assert size_class(BBox(0, 0, 96, 96.001)) is SizeClass.L

    def test_example_areas(self):
        assert size_class(BBox(0, 0, 10, 10)) is SizeClass.S
        assert size_class(BBox(0, 0, 50, 50)) is SizeClass.M
        assert size_class(BBox(0, 0, 200, 200)) is SizeClass.L

    def test_custom_thresholds(self):
        cfg = SizeThresholds(small_max=10.0, medium_max=20.0)
        assert size_class(BBox(0, 0, 3, 3), cfg) is SizeClass.S
        with pytest.raises(ValueError):
            SizeThresholds(small_max=50.0, medium_max=50.0)


class TestAnnotationWorkflow:
    def test_defaults_are_human_accepted(self):
        a = Annotation(0, BBox(0, 0, 1, 1))
        assert a.status is Status.ACCEPTED
        assert a.source is Source.HUMAN

    def test_proposed_can_move_anywhere(self):
        a = Annotation(0, BBox(0, 0, 1, 1), status=Status.PROPOSED, source=Source.MODEL)
        for target in (Status.ACCEPTED, Status.CORRECTED, Status.REJECTED):
            assert a.with_status(target).status is target

    def test_terminal_states_frozen(self):
        a = Annotation(0, BBox(0, 0, 1, 1), status=Status.ACCEPTED)
        with pytest.raises(ValueError):
            a.with_status(Status.REJECTED)
        assert a.with_status(Status.ACCEPTED) is a

    def test_detection_confidence_range(self):
        with pytest.raises(ValueError):
            Detection(0, BBox(0, 0, 1, 1), 1.5)
        Detection(0, BBox(0, 0, 1, 1), 0.0)
        Detection(0, BBox(0, 0, 1, 1), 1.0)


class TestManifest:
    def test_lookup_and_uniqueness(self):
        m = DatasetManifest(
            classes=("boll", "weed"),
            images=(
                ImageRecord("a", "images/a.png", 640, 640),
                ImageRecord("b", "images/b.png", 640, 640, split=Split.VAL),
            ),
        )
        assert m.image("b").split is Split.VAL
        with pytest.raises(KeyError):
            m.image("zzz")

    def test_duplicate_ids_rejected(self):
        rec = ImageRecord("a", "a.png", 10, 10)
        with pytest.raises(ValueError):
            DatasetManifest(classes=("c",), images=(rec, rec))

    def test_duplicate_classes_rejected(self):
        with pytest.raises(ValueError):
            DatasetManifest(classes=("c", "c"), images=())

    def test_bad_image_dims_rejected(self):
        with pytest.raises(ValueError):
            ImageRecord("a", "a.png", 0, 10)
