"""Box-aware augmentation: single ops, then a seeded oversampling plan.

Shows the individual transforms keeping boxes glued to their pixels,
and how a class-balance plan is drawn once (seeded) and replayed
deterministically.
"""

import numpy as np

from adk.augment import (
    apply_spec,
    hflip,
    illumination,
    oversample_plan,
    plan_from_jsonl,
    plan_to_jsonl,
    rotate,
    translate,
)
from adk.geometry import Annotation, BBox

rng = np.random.default_rng(1)
img = rng.integers(0, 256, size=(100, 100, 3), dtype=np.uint8)
anns = [Annotation(0, BBox(10, 20, 40, 50))]

# horizontal flip mirrors boxes around the vertical centerline
_, flipped = hflip(img, anns)
print("hflip:", anns[0].bbox, "->", flipped[0].bbox)

# a quarter turn about the image center keeps the box axis-aligned
_, turned = rotate(img, anns, 90.0)
print("rotate 90:", anns[0].bbox, "->", turned[0].bbox)

# translation clips at the border and drops boxes that mostly leave
_, shifted = translate(img, anns, (-35, 0))
print("translate (-35, 0) keeps", len(shifted), "boxes ->", shifted[0].bbox if shifted else None)

# simulated weak lighting: w=0.35 pulls everything toward white
dim = illumination(img, 0.35)
print(f"illumination 0.35: mean {img.mean():.1f} -> {dim.mean():.1f}")

# an oversampling plan lists (source image, transform spec) pairs drawn
# to lift a class from 24 images to 250; same seed, same plan
class_images = {"cotton": [f"img_{i:02d}" for i in range(24)]}
plan = oversample_plan(class_images, target_per_class=250, seed=7)
print(f"plan has {len(plan)} entries, first:", plan[0][0], plan[0][1].op)

again = oversample_plan(class_images, target_per_class=250, seed=7)
assert plan_to_jsonl(plan) == plan_to_jsonl(again)
print("plan is byte-identical across runs with the same seed")

# the plan replays without touching the global rng
restored = plan_from_jsonl(plan_to_jsonl(plan))
out_img, out_anns = apply_spec(img, anns, restored[0][1])
print("first spec applied:", out_img.shape, out_img.dtype, len(out_anns), "boxes")
