"""Acceptance gate: one test per releasable guarantee.

Run with ``pytest -v tests/test_acceptance.py`` to get a pass/fail line
per guarantee. Reference implementations are restated locally so each
check stands on its own rather than trusting library internals.
"""

import time

import numpy as np
import pytest
from fastapi.testclient import TestClient

from adk.anchors import anchor_fitness, kmeans_anchors
from adk.augment import illumination
from adk.evalkit import average_precision, evaluate, map_at, prf1
from adk.geometry import Annotation, BBox, DatasetManifest, Detection, ImageRecord, iou
from adk.labelio import (
    read_labelme,
    read_voc,
    read_yolo,
    split_dataset,
    write_labelme,
    write_voc,
    write_yolo,
)
from adk.lsk import ConvSpec, conv2d_direct, conv2d_fast, lsk_forward, random_lsk_params, zero_lsk_params
from adk.pseudolabel import nms
from adk.review import create_app
from adk.tiling import plan_tiles, remap_annotations, stitch_detections


def random_detections(rng, n, extent=200.0, classes=3):
    dets = []
    for _ in range(n):
        x1 = rng.uniform(0, extent)
        y1 = rng.uniform(0, extent)
        dets.append(
            Detection(
                class_id=int(rng.integers(0, classes)),
                bbox=BBox(x1, y1, x1 + rng.uniform(5, 60), y1 + rng.uniform(5, 60)),
                confidence=float(rng.uniform(0.05, 1.0)),
            )
        )
    return dets


def brute_force_nms(dets, thr, class_agnostic=False):
    from adk.pseudolabel import detection_sort_key

    pending = sorted(dets, key=detection_sort_key)
    kept = []
    for d in pending:
        clash = any(
            (class_agnostic or k.class_id == d.class_id) and iou(k.bbox, d.bbox) > thr
            for k in kept
        )
        if not clash:
            kept.append(d)
    return kept


def cutoff_enumeration_ap(preds, gts, iou_thr):
    """AP as the exact area under the cutoff-enumerated PR staircase."""
    from adk.evalkit import match

    points = [(0.0, 1.0)]
    for cutoff in sorted({d.confidence for d in preds}, reverse=True):
        kept = [d for d in preds if d.confidence >= cutoff]
        m = match(kept, gts, iou_thr)
        if m.tp + m.fp:
            points.append((m.tp / len(gts), m.tp / (m.tp + m.fp)))
    area = 0.0
    for i in range(1, len(points)):
        r_prev = points[i - 1][0]
        r_cur = points[i][0]
        envelope = max(p for _, p in points[i:])
        area += (r_cur - r_prev) * envelope
    return area


def test_tile_planning_grid_count_and_speed():
    elapsed = []
    for _ in range(5):
        t0 = time.perf_counter()
        plan = plan_tiles(5472, 3648, (640, 640), (630, 630), "clamp")
        elapsed.append(time.perf_counter() - t0)
    assert len(plan) == 54
    assert len(plan.x_offsets) == 9
    assert len(plan.y_offsets) == 6
    assert min(elapsed) < 1e-3


def test_split_partition_sizes_and_determinism():
    manifest = DatasetManifest(
        classes=("boll",),
        images=tuple(
            ImageRecord(id=f"t{i:04d}", path=f"t{i:04d}.png", width=640, height=640)
            for i in range(5670)
        ),
    )
    runs = [split_dataset(manifest, (8, 1, 1), seed=11) for _ in range(2)]
    counts = {}
    for im in runs[0].images:
        counts[im.split.value] = counts.get(im.split.value, 0) + 1
    assert counts == {"train": 4536, "val": 567, "test": 567}
    assert [(im.id, im.split) for im in runs[0].images] == [
        (im.id, im.split) for im in runs[1].images
    ]


def test_f1_at_reference_operating_point():
    r = prf1(tp=902, fp=98, fn=123)
    assert r.precision == pytest.approx(0.902, abs=1e-12)
    assert r.recall == pytest.approx(0.880, abs=1e-12)
    assert 0.8905 <= r.f1 <= 0.8915
    assert round(r.f1, 2) == 0.89


def test_illumination_identity_and_black_image_value():
    rng = np.random.default_rng(40)
    for _ in range(100):
        shape = (int(rng.integers(8, 64)), int(rng.integers(8, 64)))
        if rng.random() < 0.5:
            shape = shape + (3,)
        img = rng.integers(0, 256, size=shape, dtype=np.uint8)
        out = illumination(img, 1.0)
        assert out.dtype == np.uint8
        assert np.array_equal(out, img)
    dark = illumination(np.zeros((32, 32), dtype=np.uint8), 0.35)
    assert (dark == 166).all()


def test_nms_matches_quadratic_reference():
    rng = np.random.default_rng(41)
    t0 = time.perf_counter()
    for trial in range(1000):
        dets = random_detections(rng, int(rng.integers(0, 51)))
        thr = float(rng.uniform(0.1, 0.9))
        agnostic = bool(rng.random() < 0.3)
        assert nms(dets, thr, agnostic) == brute_force_nms(dets, thr, agnostic)
    assert time.perf_counter() - t0 < 5.0


def test_ap_matches_cutoff_enumeration_and_perfect_detector():
    rng = np.random.default_rng(42)
    for trial in range(1000):
        n_gt = int(rng.integers(1, 21))
        n_pred = int(rng.integers(1, 21))
        gts = [
            Annotation(0, BBox(x, y, x + w, y + h))
            for x, y, w, h in zip(
                rng.uniform(0, 150, n_gt),
                rng.uniform(0, 150, n_gt),
                rng.uniform(8, 40, n_gt),
                rng.uniform(8, 40, n_gt),
            )
        ]
        # distinct confidences keep every ranking cutoff realizable
        confs = rng.permutation(np.linspace(0.05, 0.95, n_pred))
        preds = []
        for i in range(n_pred):
            if i < n_gt and rng.random() < 0.7:
                base = gts[i].bbox
                dx, dy = rng.uniform(-6, 6, 2)
                box = BBox(base.x1 + dx, base.y1 + dy, base.x2 + dx, base.y2 + dy)
            else:
                x, y = rng.uniform(0, 150, 2)
                box = BBox(x, y, x + rng.uniform(8, 40), y + rng.uniform(8, 40))
            preds.append(Detection(0, box, float(confs[i])))
        ap = average_precision(preds, gts, iou_thr=0.5)
        assert ap == pytest.approx(cutoff_enumeration_ap(preds, gts, 0.5), abs=1e-9)

    # a detector that repeats the ground truth is perfect at every threshold
    gts_by_image = {
        "a": [Annotation(0, BBox(10, 10, 50, 50)), Annotation(1, BBox(80, 80, 140, 120))],
        "b": [Annotation(0, BBox(5, 5, 25, 30))],
    }
    preds_by_image = {
        img: [Detection(a.class_id, a.bbox, 0.9 - 0.1 * i) for i, a in enumerate(anns)]
        for img, anns in gts_by_image.items()
    }
    report = map_at(preds_by_image, gts_by_image, [0.5 + 0.05 * i for i in range(10)])
    assert report.per_threshold[0.5] == 1.0
    assert report.mean == 1.0


def test_fast_convolution_matches_direct_reference():
    rng = np.random.default_rng(43)
    t0 = time.perf_counter()
    worst = 0.0
    for trial in range(1000):
        groups = int(rng.integers(1, 4)) if rng.random() < 0.5 else 1
        cin = groups * int(rng.integers(1, 3))
        cout = groups * int(rng.integers(1, 3))
        k = int(rng.choice([1, 3, 5, 7]))
        d = int(rng.choice([1, 3]))
        p = int(rng.integers(0, 4))
        span = d * (k - 1) + 1
        h = max(int(rng.integers(4, 33)), span - 2 * p)
        w = max(int(rng.integers(4, 33)), span - 2 * p)
        b = int(rng.integers(1, 3))
        weights = rng.normal(size=(cout, cin // groups, k, k))
        bias = rng.normal(size=cout) if rng.random() < 0.5 else None
        spec = ConvSpec(cin, cout, k, padding=p, dilation=d, groups=groups,
                        weights=weights, bias=bias)
        x = rng.normal(size=(b, cin, h, w))
        ref = conv2d_direct(x, spec)
        fast = conv2d_fast(x, spec)
        rel = np.abs(fast - ref) / np.maximum(np.abs(ref), 1.0)
        worst = max(worst, float(rel.max()))
    assert worst < 1e-6
    assert time.perf_counter() - t0 < 30.0


def test_lsk_shape_zero_params_and_attention_range():
    from scipy.special import expit

    from adk.lsk import channel_pool, ghost_conv

    rng = np.random.default_rng(44)
    for trial in range(100):
        c = 4 * int(rng.integers(1, 4))
        h = int(rng.integers(5, 14))
        w = int(rng.integers(5, 14))
        b = int(rng.integers(1, 3))
        params = random_lsk_params(c, seed=trial, scale=0.2)
        x = rng.normal(size=(b, c, h, w))
        out = lsk_forward(x, params)
        assert out.shape == x.shape

        # attention gates recomputed from the public building blocks
        shallow = conv2d_fast(x, params.branch1)
        deep = conv2d_fast(shallow, params.branch2)
        merged = np.concatenate(
            [ghost_conv(shallow, params.ghost1), ghost_conv(deep, params.ghost2)], axis=1
        )
        mean_map, max_map = channel_pool(merged)
        gates = expit(conv2d_fast(np.concatenate([mean_map, max_map], axis=1), params.attention))
        assert (gates > 0.0).all() and (gates < 1.0).all()

    x = rng.normal(size=(2, 8, 9, 9))
    assert np.array_equal(lsk_forward(x, zero_lsk_params(8)), np.zeros_like(x))


def test_anchor_recovery_and_monotone_cost():
    boxes = np.array([[10.0, 10.0]] * 50 + [[100.0, 100.0]] * 50)
    result = kmeans_anchors(boxes, k=2, seed=5)
    assert sorted(map(tuple, result.anchors.tolist())) == [(10.0, 10.0), (100.0, 100.0)]
    assert anchor_fitness(boxes, result.anchors) == pytest.approx(1.0)

    rng = np.random.default_rng(45)
    for trial in range(100):
        n = int(rng.integers(5, 120))
        dims = rng.uniform(2, 300, size=(n, 2))
        k = int(rng.integers(1, min(10, n + 1)))
        res = kmeans_anchors(dims, k=k, seed=trial)
        hist = np.asarray(res.cost_history)
        assert hist.size == res.iterations
        assert (np.diff(hist) <= 1e-9).all()


def test_format_and_tile_round_trips():
    rng = np.random.default_rng(46)
    classes = ("boll", "leaf", "soil")
    width = height = 640
    worst = 0.0
    remaining = 10_000
    while remaining > 0:
        n = min(200, remaining)
        remaining -= n
        raw = []
        for _ in range(n):
            x1 = rng.uniform(0, width - 20)
            y1 = rng.uniform(0, height - 20)
            raw.append(
                Annotation(
                    class_id=int(rng.integers(0, 3)),
                    bbox=BBox(x1, y1, x1 + rng.uniform(2, 18), y1 + rng.uniform(2, 18)),
                )
            )
        # canonicalize onto the 6-decimal normalized grid first, so the
        # only loss left in the chain is the voc integer rounding
        anns = read_yolo(write_yolo(raw, width, height), width, height, classes)
        via_voc = read_voc(write_voc(anns, classes, "x.png", width, height), classes)
        via_labelme, skipped = read_labelme(
            write_labelme(via_voc, classes, "x.png", width, height), classes
        )
        back = read_yolo(write_yolo(via_labelme, width, height), width, height, classes)
        assert skipped == 0
        assert [a.class_id for a in back] == [a.class_id for a in raw]
        for orig, conv in zip(anns, via_labelme):
            for attr in ("x1", "y1", "x2", "y2"):
                err = abs(getattr(conv.bbox, attr) - getattr(orig.bbox, attr))
                worst = max(worst, err)
    assert worst <= 0.5

    plan = plan_tiles(2560, 2560, (640, 640), (630, 630), "clamp")
    worst = 0.0
    for _ in range(10_000):
        col = int(rng.integers(0, len(plan.x_offsets)))
        row = int(rng.integers(0, len(plan.y_offsets)))
        ox, oy = plan.origin_of(row, col)
        x1 = ox + rng.uniform(0, 640 - 30)
        y1 = oy + rng.uniform(0, 640 - 30)
        ann = Annotation(0, BBox(x1, y1, x1 + rng.uniform(1, 30), y1 + rng.uniform(1, 30)))
        local = remap_annotations([ann], (ox, oy), (640, 640), min_visibility=0.99)
        assert len(local) == 1
        back = stitch_detections([((ox, oy), [Detection(0, local[0].bbox, 0.9)])])
        for attr in ("x1", "y1", "x2", "y2"):
            worst = max(worst, abs(getattr(back[0].bbox, attr) - getattr(ann.bbox, attr)))
    assert worst < 1e-9


def test_tile_detect_stitch_eval_smoke():
    t0 = time.perf_counter()
    rng = np.random.default_rng(47)
    size = 2560
    image = np.full((size, size, 3), 30, dtype=np.uint8)
    plan = plan_tiles(size, size, (640, 640), (630, 630), "clamp", image_id="smoke")
    # boxes are placed fully inside a window so the synthetic detector
    # sees each object whole in at least one tile; two quadrant bands per
    # axis keep all boxes pairwise disjoint
    slots = [
        (r, c, qy, qx) for r in range(4) for c in range(4) for qy in (0, 1) for qx in (0, 1)
    ]
    picks = rng.permutation(len(slots))[:40]
    gts = []
    for idx in picks:
        r, c, qy, qx = slots[idx]
        ox, oy = plan.origin_of(r, c)
        w = int(rng.integers(40, 81))
        h = int(rng.integers(40, 81))
        x1 = ox + 10 + qx * 320 + int(rng.integers(0, 171))
        y1 = oy + 10 + qy * 320 + int(rng.integers(0, 171))
        image[y1 : y1 + h, x1 : x1 + w] = (200, 60, 60)
        gts.append(Annotation(int(rng.integers(0, 2)), BBox(x1, y1, x1 + w, y1 + h)))
    assert len(gts) == 40

    per_tile = []
    for row in range(len(plan.y_offsets)):
        for col in range(len(plan.x_offsets)):
            origin = plan.origin_of(row, col)
            local = remap_annotations(gts, origin, plan.window, min_visibility=1.0)
            per_tile.append(
                (origin, [Detection(a.class_id, a.bbox, 0.9) for a in local])
            )
    stitched = stitch_detections(per_tile, nms_iou=0.45)
    assert len(stitched) == len(gts)

    report = evaluate({"smoke": stitched}, {"smoke": gts}, num_classes=2)
    for entry in report.per_class.values():
        assert entry.precision == 1.0
        assert entry.recall == 1.0
    assert report.map50 == 1.0
    assert time.perf_counter() - t0 < 10.0


def _review_root(tmp_path):
    from adk.labelio import manifest_to_json

    (tmp_path / "labels").mkdir()
    manifest = DatasetManifest(
        classes=("boll",),
        images=(ImageRecord(id="im0", path="images/im0.png", width=640, height=640),),
    )
    (tmp_path / "manifest.json").write_text(manifest_to_json(manifest), encoding="utf-8")
    (tmp_path / "labels" / "im0.txt").write_text(
        "0 0.100000 0.100000 0.050000 0.050000\n"
        "0 0.300000 0.300000 0.050000 0.050000\n"
        "0 0.600000 0.600000 0.050000 0.050000\n",
        encoding="utf-8",
    )
    return tmp_path


def test_review_session_statuses_and_revision(tmp_path):
    client = TestClient(create_app(_review_root(tmp_path)))
    doc = client.get("/api/labels/im0").json()
    assert doc["revision"] == 0
    records = doc["annotations"]
    assert len(records) == 3

    # first save: accept two proposals, reject the third
    records[0]["status"] = "accepted"
    records[1]["status"] = "accepted"
    records[2]["status"] = "rejected"
    r = client.put("/api/labels/im0", json={"revision": 0, "annotations": records})
    assert r.status_code == 200

    # second save: draw one new box by hand
    records.append(
        {"class_id": 0, "x1": 400.0, "y1": 400.0, "x2": 440.0, "y2": 440.0,
         "status": "accepted", "source": "human"}
    )
    r = client.put("/api/labels/im0", json={"revision": 1, "annotations": records})
    assert r.status_code == 200

    doc = client.get("/api/labels/im0").json()
    assert doc["revision"] == 2  # one bump per save
    tally = {}
    for rec in doc["annotations"]:
        key = (rec["status"], rec["source"])
        tally[key] = tally.get(key, 0) + 1
    assert tally == {
        ("accepted", "model"): 2,
        ("rejected", "model"): 1,
        ("accepted", "human"): 1,
    }


def test_review_conflicting_saves(tmp_path):
    root = _review_root(tmp_path)
    client = TestClient(create_app(root))
    base = client.get("/api/labels/im0").json()

    first = [dict(r, status="accepted") for r in base["annotations"]]
    second = [dict(r, status="rejected") for r in base["annotations"]]
    r1 = client.put("/api/labels/im0", json={"revision": base["revision"], "annotations": first})
    r2 = client.put("/api/labels/im0", json={"revision": base["revision"], "annotations": second})
    assert r1.status_code == 200
    assert r2.status_code == 409

    # disk holds the winner: all three boxes accepted, none dropped
    txt = (root / "labels" / "im0.txt").read_text("utf-8")
    assert len(txt.strip().splitlines()) == 3
    survivors = client.get("/api/labels/im0").json()["annotations"]
    assert all(rec["status"] == "accepted" for rec in survivors)
