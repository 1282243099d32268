"""Shared geometric and dataset types plus the primitive box operations.

Boxes are stored corner-form (x1, y1, x2, y2) in continuous pixel
coordinates with the origin at the top-left corner. Integer rasterization
happens only when an image is actually cropped, so tile/stitch round trips
do not accumulate rounding error. Degenerate (zero-area) boxes are legal
values but match nothing: their IoU against any box is 0.

All types are immutable values and every operation is pure.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, replace


class Status(str, enum.Enum):
    """Review status of an annotation."""

    PROPOSED = "proposed"
    ACCEPTED = "accepted"
    CORRECTED = "corrected"
    REJECTED = "rejected"


class Source(str, enum.Enum):
    """Provenance of an annotation."""

    HUMAN = "human"
    MODEL = "model"


class Split(str, enum.Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNSPLIT = "unsplit"


# Transitions allowed on an annotation's review status. Human-sourced
# annotations start accepted and never transition.
_ALLOWED_TRANSITIONS = {
    Status.PROPOSED: {Status.ACCEPTED, Status.CORRECTED, Status.REJECTED},
}


@dataclass(frozen=True)
class BBox:
    """Axis-aligned box with corners (x1, y1) top-left, (x2, y2) bottom-right."""

    x1: float
    y1: float
    x2: float
    y2: float

    def __post_init__(self):
        for v in (self.x1, self.y1, self.x2, self.y2):
            if not math.isfinite(v):
                raise ValueError(f"non-finite box coordinate: {v!r}")
        if self.x2 < self.x1 or self.y2 < self.y1:
            raise ValueError(f"inverted box corners: {self}")

    @property
    def width(self) -> float:
        return self.x2 - self.x1

    @property
    def height(self) -> float:
        return self.y2 - self.y1

    @property
    def area(self) -> float:
        return self.width * self.height

    def translate(self, dx: float, dy: float) -> "BBox":
        return BBox(self.x1 + dx, self.y1 + dy, self.x2 + dx, self.y2 + dy)

    def clip(self, x1: float, y1: float, x2: float, y2: float) -> "BBox | None":
        """Intersect with a rectangle; None when the intersection is empty."""
        nx1 = max(self.x1, x1)
        ny1 = max(self.y1, y1)
        nx2 = min(self.x2, x2)
        ny2 = min(self.y2, y2)
        if nx2 <= nx1 or ny2 <= ny1:
            return None
        return BBox(nx1, ny1, nx2, ny2)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.x1, self.y1, self.x2, self.y2)


@dataclass(frozen=True)
class NormBBox:
    """Normalized center/size box; every field lies in [0, 1].

    The box implied by (cx, cy, w, h) is clipped to the unit square when
    converted back to pixel space.
    """

    cx: float
    cy: float
    w: float
    h: float

    def __post_init__(self):
        for name in ("cx", "cy", "w", "h"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"non-finite normalized coordinate {name}={v!r}")
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"normalized coordinate {name}={v} outside [0, 1]")


@dataclass(frozen=True)
class Annotation:
    """A ground-truth or reviewed box with class identity and review state."""

    class_id: int
    bbox: BBox
    status: Status = Status.ACCEPTED
    source: Source = Source.HUMAN

    def with_status(self, new: Status) -> "Annotation":
        """Transition the review status; only proposed annotations may move."""
        if new == self.status:
            return self
        allowed = _ALLOWED_TRANSITIONS.get(self.status, set())
        if new not in allowed:
            raise ValueError(f"illegal status transition {self.status.value} -> {new.value}")
        return replace(self, status=new)


@dataclass(frozen=True)
class Detection:
    """A model prediction: class, box and confidence in [0, 1]."""

    class_id: int
    bbox: BBox
    confidence: float

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence {self.confidence} outside [0, 1]")


@dataclass(frozen=True)
class ImageRecord:
    id: str
    path: str
    width: int
    height: int
    split: Split = Split.UNSPLIT

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError(f"image {self.id}: non-positive dimensions")


@dataclass(frozen=True)
class DatasetManifest:
    """Class list plus image records; the unit the pipeline passes around."""

    classes: tuple[str, ...]
    images: tuple[ImageRecord, ...]
    label_dir: str | None = None

    def __post_init__(self):
        if len(set(self.classes)) != len(self.classes):
            raise ValueError("duplicate class names in manifest")
        ids = [im.id for im in self.images]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate image ids in manifest")

    def image(self, image_id: str) -> ImageRecord:
        for im in self.images:
            if im.id == image_id:
                return im
        raise KeyError(image_id)


@dataclass(frozen=True)
class SizeThresholds:
    """Area cutoffs splitting boxes into S/M/L, inclusive upper bounds.

    The defaults (32^2 and 96^2 px^2) follow the common detection-benchmark
    convention; both are configurable.
    """

    small_max: float = 32.0 * 32.0
    medium_max: float = 96.0 * 96.0

    def __post_init__(self):
        if not self.small_max < self.medium_max:
            raise ValueError("small cutoff must be below medium cutoff")


class SizeClass(str, enum.Enum):
    S = "S"
    M = "M"
    L = "L"


def iou(a: BBox, b: BBox) -> float:
    """Intersection over union of two boxes, in [0, 1].

    Degenerate (zero-area) boxes match nothing, so any pairing involving
    one yields 0; this also covers the union == 0 case.
    """
    ix1 = a.x1 if a.x1 > b.x1 else b.x1
    iy1 = a.y1 if a.y1 > b.y1 else b.y1
    ix2 = a.x2 if a.x2 < b.x2 else b.x2
    iy2 = a.y2 if a.y2 < b.y2 else b.y2
    iw = ix2 - ix1
    ih = iy2 - iy1
    if iw <= 0.0 or ih <= 0.0:
        return 0.0
    inter = iw * ih
    union = a.area + b.area - inter
    if union <= 0.0:
        return 0.0
    return inter / union


def to_normalized(b: BBox, width: float, height: float) -> NormBBox:
    """Convert a pixel box to normalized center/size form.

    The box is clipped to the image rectangle first, so out-of-frame
    spill never produces coordinates outside [0, 1].
    """
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    clipped = b.clip(0.0, 0.0, float(width), float(height))
    if clipped is None:
        raise ValueError(f"box {b} lies outside a {width}x{height} image")
    return NormBBox(
        cx=(clipped.x1 + clipped.x2) / (2.0 * width),
        cy=(clipped.y1 + clipped.y2) / (2.0 * height),
        w=clipped.width / width,
        h=clipped.height / height,
    )


def from_normalized(nb: NormBBox, width: float, height: float) -> BBox:
    """Inverse of :func:`to_normalized`, clipping the implied box to the image."""
    if width < 1 or height < 1:
        raise ValueError("image dimensions must be >= 1")
    x1 = (nb.cx - nb.w / 2.0) * width
    x2 = (nb.cx + nb.w / 2.0) * width
    y1 = (nb.cy - nb.h / 2.0) * height
    y2 = (nb.cy + nb.h / 2.0) * height
    x1 = min(max(x1, 0.0), float(width))
    x2 = min(max(x2, 0.0), float(width))
    y1 = min(max(y1, 0.0), float(height))
    y2 = min(max(y2, 0.0), float(height))
    return BBox(x1, y1, x2, y2)


def size_class(b: BBox, cfg: SizeThresholds = SizeThresholds()) -> SizeClass:
    """Classify a box as S, M or L by area, with inclusive upper bounds."""
    area = b.area
    if area <= cfg.small_max:
        return SizeClass.S
    if area <= cfg.medium_max:
        return SizeClass.M
    return SizeClass.L
