"""Pseudo-labeling loop: model detections -> proposals -> human edits.

Takes a pile of raw detections for one image, turns them into proposed
labels (confidence gate + NMS), then plays out a short review session
and prints what the label set looks like after each step.
"""

from adk.geometry import BBox, Detection
from adk.pseudolabel import Edit, PseudoLabelConfig, merge_corrections, propose_labels

raw = [
    Detection(0, BBox(100, 100, 180, 170), 0.92),
    Detection(0, BBox(103, 101, 182, 168), 0.55),   # duplicate of the first
    Detection(1, BBox(400, 220, 470, 300), 0.81),
    Detection(0, BBox(520, 520, 560, 570), 0.31),
    Detection(1, BBox(50, 400, 90, 440), 0.12),     # below the gate
]

cfg = PseudoLabelConfig(confidence_threshold=0.25, nms_iou=0.45)
proposals = propose_labels(raw, cfg)
print(f"{len(raw)} raw detections -> {len(proposals)} proposals")
for p in proposals:
    print("  ", p.class_id, p.bbox, p.status.value, p.source.value)

# reviewer: keep the first two, fix the third's class, add a missed box
edits = [
    Edit("accept", index=0),
    Edit("accept", index=1),
    Edit("correct", index=2, class_id=1),
    Edit("add", class_id=0, bbox=BBox(600, 40, 640, 90)),
]
merged = merge_corrections(proposals, edits)
print("after review:")
for a in merged:
    print("  ", a.class_id, a.bbox, a.status.value, a.source.value)

# rejected proposals disappear from the active set entirely
merged = merge_corrections(proposals, [Edit("reject", index=0)])
print(f"rejecting the first proposal leaves {len(merged)} active labels")
