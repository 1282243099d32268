"""Detection scoring walk-through: matching, PR, AP, and the full report.

Builds a tiny two-class ground truth, degrades a perfect detector step
by step, and prints how each metric responds.
"""

import numpy as np

from adk.evalkit import average_precision, evaluate, match, prf1, report_table
from adk.geometry import Annotation, BBox, Detection

gts_by_image = {
    "patch_a": [
        Annotation(0, BBox(10, 10, 60, 60)),
        Annotation(0, BBox(100, 20, 150, 80)),
        Annotation(1, BBox(200, 200, 260, 260)),
    ],
    "patch_b": [
        Annotation(0, BBox(30, 40, 80, 90)),
        Annotation(1, BBox(120, 120, 170, 180)),
    ],
}

# a perfect detector echoes the ground truth with high confidence
perfect = {
    img: [Detection(a.class_id, a.bbox, 0.95 - 0.05 * i) for i, a in enumerate(anns)]
    for img, anns in gts_by_image.items()
}
report = evaluate(perfect, gts_by_image, num_classes=2)
print("perfect detector:")
print(report_table(report, ("boll", "leaf")))

# nudge one box off target and drop another: recall and AP both move
degraded = {img: list(dets) for img, dets in perfect.items()}
degraded["patch_a"][0] = Detection(0, BBox(40, 40, 90, 90), 0.95)  # drifted
degraded["patch_b"] = degraded["patch_b"][:1]                      # one miss
report = evaluate(degraded, gts_by_image, num_classes=2)
print("degraded detector:")
print(report_table(report, ("boll", "leaf")))

# matching is greedy per image in confidence order
m = match(degraded["patch_a"], gts_by_image["patch_a"], iou_thr=0.5)
print(f"patch_a: tp={m.tp} fp={m.fp} fn={m.fn}")

# the F1 arithmetic at a typical strong operating point
r = prf1(tp=902, fp=98, fn=123)
print(f"P={r.precision:.3f} R={r.recall:.3f} F1={r.f1:.4f} (rounds to {round(r.f1, 2)})")

# AP integrates the whole confidence sweep, not one threshold
preds = [
    Detection(0, BBox(0, 0, 10, 10), 0.9),
    Detection(0, BBox(40, 0, 50, 10), 0.8),   # false positive, ranked second
    Detection(0, BBox(20, 0, 30, 10), 0.7),
    Detection(0, BBox(60, 0, 70, 10), 0.6),
]
gts = [
    Annotation(0, BBox(0, 0, 10, 10)),
    Annotation(0, BBox(20, 0, 30, 10)),
    Annotation(0, BBox(60, 0, 70, 10)),
]
ap = average_precision(preds, gts, iou_thr=0.5)
print(f"interleaved false positive: AP = {ap:.4f} (exactly 5/6 = {5 / 6:.4f})")
