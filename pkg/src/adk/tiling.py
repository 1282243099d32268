"""Sliding-window decomposition of large images, and the inverse stitch.

A TilePlan is the deterministic mapping between a full-resolution image
and its window grid: serializing the same plan twice yields byte-identical
JSON. Under the clamp policy the final window per axis slides back to
touch the image edge, so the union of tiles covers every pixel.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Annotation, BBox, Detection
from .pseudolabel import nms

CLAMP = "clamp"
DROP_PARTIAL = "drop_partial"


@dataclass(frozen=True)
class TilePlan:
    image_id: str
    image_size: tuple[int, int]  # (W, H)
    window: tuple[int, int]  # (w, h)
    stride: tuple[int, int]  # (sx, sy)
    policy: str
    x_offsets: tuple[int, ...]
    y_offsets: tuple[int, ...]

    @property
    def origins(self) -> list[tuple[int, int]]:
        """All tile origins in row-major order (y outer, x inner)."""
        return [(x, y) for y in self.y_offsets for x in self.x_offsets]

    def __len__(self) -> int:
        return len(self.x_offsets) * len(self.y_offsets)

    def tile_id(self, row: int, col: int) -> str:
        return f"{self.image_id}_r{row}_c{col}"

    def origin_of(self, row: int, col: int) -> tuple[int, int]:
        return (self.x_offsets[col], self.y_offsets[row])

    def to_json(self) -> str:
        doc = {
            "image_id": self.image_id,
            "image_size": list(self.image_size),
            "window": list(self.window),
            "stride": list(self.stride),
            "policy": self.policy,
            "x_offsets": list(self.x_offsets),
            "y_offsets": list(self.y_offsets),
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"

    @staticmethod
    def from_json(text: str) -> "TilePlan":
        doc = json.loads(text)
        return TilePlan(
            image_id=doc["image_id"],
            image_size=tuple(doc["image_size"]),
            window=tuple(doc["window"]),
            stride=tuple(doc["stride"]),
            policy=doc["policy"],
            x_offsets=tuple(doc["x_offsets"]),
            y_offsets=tuple(doc["y_offsets"]),
        )


def _axis_offsets(extent: int, window: int, stride: int, policy: str) -> list[int]:
    if window >= extent:
        if window > extent and policy == DROP_PARTIAL:
            raise ValueError("window exceeds image")
        return [0]
    offsets = list(range(0, extent - window + 1, stride))
    if policy == CLAMP and offsets[-1] + window < extent:
        offsets.append(extent - window)
    return offsets


def plan_tiles(
    width: int,
    height: int,
    window: tuple[int, int],
    stride: tuple[int, int],
    policy: str = CLAMP,
    image_id: str = "",
) -> TilePlan:
    """Enumerate window origins over a width x height image.

    Per axis the offsets are 0, s, 2s, ... capped so the window stays
    inside the image; under clamp a final offset at extent - window is
    appended whenever the strided grid leaves the far edge uncovered.
    drop_partial omits that clamped offset and refuses windows larger
    than the image. A window spanning the whole axis degenerates to a
    single offset at 0.
    """
    w, h = window
    sx, sy = stride
    if w < 1 or h < 1:
        raise ValueError("window dimensions must be >= 1")
    if sx < 1 or sy < 1:
        raise ValueError("stride must be >= 1")
    if policy not in (CLAMP, DROP_PARTIAL):
        raise ValueError(f"unknown tiling policy {policy!r}")
    return TilePlan(
        image_id=image_id,
        image_size=(width, height),
        window=(w, h),
        stride=(sx, sy),
        policy=policy,
        x_offsets=tuple(_axis_offsets(width, w, sx, policy)),
        y_offsets=tuple(_axis_offsets(height, h, sy, policy)),
    )


def remap_annotations(
    anns: Sequence[Annotation],
    origin: tuple[int, int],
    window: tuple[int, int],
    min_visibility: float = 0.25,
) -> list[Annotation]:
    """Clip annotations to one tile and translate them to tile-local coordinates.

    A box is kept iff the clipped fraction of its original area is at least
    ``min_visibility`` (boxes with no overlap are always dropped). An empty
    result is fine; tiles without targets are retained downstream.
    """
    if not 0.0 <= min_visibility <= 1.0:
        raise ValueError("min_visibility must lie in [0, 1]")
    ox, oy = origin
    w, h = window
    out: list[Annotation] = []
    for ann in anns:
        original_area = ann.bbox.area
        clipped = ann.bbox.clip(ox, oy, ox + w, oy + h)
        if clipped is None or original_area <= 0.0:
            continue
        if clipped.area / original_area < min_visibility:
            continue
        out.append(
            Annotation(
                class_id=ann.class_id,
                bbox=clipped.translate(-ox, -oy),
                status=ann.status,
                source=ann.source,
            )
        )
    return out


def stitch_detections(
    per_tile: Sequence[tuple[tuple[int, int], Sequence[Detection]]],
    nms_iou: float = 0.45,
    class_agnostic: bool = False,
) -> list[Detection]:
    """Map tile-local detections back to full-image coordinates and dedupe.

    Each detection is translated by its tile origin, then one global
    class-wise NMS pass removes the duplicates that overlapping tiles
    produce. The result comes back in descending confidence order.
    """
    merged: list[Detection] = []
    for (ox, oy), dets in per_tile:
        for d in dets:
            merged.append(
                Detection(class_id=d.class_id, bbox=d.bbox.translate(ox, oy), confidence=d.confidence)
            )
    return nms(merged, nms_iou, class_agnostic)


def crop_tile(image: np.ndarray, origin: tuple[int, int], window: tuple[int, int]) -> np.ndarray:
    """Pixel-exact sub-image of shape ``window`` at ``origin``.

    ``image`` is an (H, W) or (H, W, C) array. The tile rectangle must lie
    fully inside the image, which the clamp policy guarantees for its plans.
    """
    ox, oy = origin
    w, h = window
    img_h, img_w = image.shape[:2]
    if ox < 0 or oy < 0 or ox + w > img_w or oy + h > img_h:
        raise ValueError(
            f"tile at ({ox},{oy}) size ({w},{h}) exceeds image ({img_w},{img_h})"
        )
    return image[oy : oy + h, ox : ox + w].copy()
