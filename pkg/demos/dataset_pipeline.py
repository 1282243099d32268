"""Dataset bookkeeping: formats, splits, and census statistics.

Round-trips labels through all three formats, splits a manifest with
the seeded shuffle, and prints the size-bucket census.
"""

import numpy as np

from adk.evalkit import SizeThresholds, dataset_stats, stats_to_json
from adk.geometry import Annotation, BBox, DatasetManifest, ImageRecord
from adk.labelio import (
    read_voc,
    read_yolo,
    split_dataset,
    write_voc,
    write_yolo,
)

rng = np.random.default_rng(4)
classes = ("boll", "leaf")

# one label file through yolo text and voc xml and back
anns = [Annotation(0, BBox(100, 120, 180, 200)), Annotation(1, BBox(300, 40, 420, 90))]
yolo_text = write_yolo(anns, 640, 640)
print("yolo text:")
print(yolo_text, end="")
voc_xml = write_voc(anns, classes, "frame.png", 640, 640)
back = read_voc(voc_xml, classes)
print("voc round trip:", [(a.class_id, a.bbox) for a in back])
assert read_yolo(yolo_text, 640, 640, classes)[0].class_id == 0

# a manifest of 60 images split 8:1:1 with a fixed seed
manifest = DatasetManifest(
    classes=classes,
    images=tuple(
        ImageRecord(id=f"f{i:03d}", path=f"f{i:03d}.png", width=640, height=640)
        for i in range(60)
    ),
)
result = split_dataset(manifest, (8, 1, 1), seed=0)
counts = {}
for im in result.images:
    counts[im.split.value] = counts.get(im.split.value, 0) + 1
print("split counts:", counts)

# census: how many images are targeted, and how sizes distribute
labels = {}
for i, im in enumerate(result.images):
    if i % 3 == 0:
        continue  # every third image has no objects at all
    n = int(rng.integers(1, 5))
    boxes = []
    for _ in range(n):
        side = float(rng.choice([12.0, 60.0, 200.0]))  # small / medium / large
        x1 = float(rng.uniform(0, 640 - side))
        y1 = float(rng.uniform(0, 640 - side))
        boxes.append(Annotation(0, BBox(x1, y1, x1 + side, y1 + side)))
    labels[im.id] = boxes

stats = dataset_stats(result, labels, thresholds=SizeThresholds())
print(stats_to_json(stats), end="")
