"""Oversampling and augmentation: photometric and geometric transforms
with the matching box transforms.

Images are uint8 numpy arrays, (H, W) or (H, W, C). All randomness lives
in plan generation; executing a plan entry is fully deterministic, so a
generated dataset is reproducible from (sources, plan).

Conventions shared by the geometric ops:

- rotation keeps the canvas size, rotating about the image center with
  border fill 114; boxes become the axis-aligned hull of their rotated
  corners, clipped to the canvas
- a clipped box is dropped when less than 10% of its transformed area
  remains visible
- pixel results are rounded half-to-even and clamped to [0, 255]
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np
from scipy import ndimage

from .geometry import Annotation, BBox

FILL_VALUE = 114  # border/cutout gray, the YOLO-family convention
MIN_RESIDUAL = 0.10

OPS = ("rotate", "translate", "brightness", "noise", "hflip", "vflip", "cutout", "illumination")


def _check_uint8(img: np.ndarray) -> np.ndarray:
    if img.dtype != np.uint8:
        raise ValueError(f"expected uint8 image, got {img.dtype}")
    if img.ndim not in (2, 3):
        raise ValueError(f"expected (H, W) or (H, W, C) image, got shape {img.shape}")
    return img


def _to_uint8(arr: np.ndarray) -> np.ndarray:
    return np.clip(np.rint(arr), 0, 255).astype(np.uint8)


def _canvas_size(img: np.ndarray) -> tuple[int, int]:
    h, w = img.shape[:2]
    return w, h


def _clip_boxes(anns: Sequence[Annotation], width: int, height: int) -> list[Annotation]:
    """Clip boxes to the canvas, dropping those below the residual-area rule."""
    out = []
    for ann in anns:
        full = ann.bbox.area
        clipped = ann.bbox.clip(0.0, 0.0, float(width), float(height))
        if clipped is None or full <= 0.0:
            continue
        if clipped.area / full < MIN_RESIDUAL:
            continue
        out.append(Annotation(ann.class_id, clipped, ann.status, ann.source))
    return out


# --- photometric ops --------------------------------------------------------


def illumination(img: np.ndarray, w: float) -> np.ndarray:
    """Blend toward white: out = in * w + 255 * (1 - w), w in [0.35, 1].

    w = 1 is a bit-exact identity; 255 is a fixed point for every valid w.
    """
    _check_uint8(img)
    if not 0.35 <= w <= 1.0:
        raise ValueError(f"illumination weight {w} outside [0.35, 1]")
    return _to_uint8(img.astype(np.float64) * w + 255.0 * (1.0 - w))


def brightness(img: np.ndarray, anns: Sequence[Annotation], gain: float):
    if gain <= 0:
        raise ValueError("brightness gain must be positive")
    _check_uint8(img)
    return _to_uint8(img.astype(np.float64) * gain), list(anns)


def noise(img: np.ndarray, anns: Sequence[Annotation], sigma: float, seed: int = 0):
    """Additive zero-mean Gaussian noise; sigma 0 is the identity."""
    if sigma < 0:
        raise ValueError("noise sigma must be >= 0")
    _check_uint8(img)
    rng = np.random.default_rng(seed)
    noisy = img.astype(np.float64) + rng.normal(0.0, sigma, size=img.shape)
    return _to_uint8(noisy), list(anns)


def cutout(img: np.ndarray, anns: Sequence[Annotation], rect: tuple[int, int, int, int]):
    """Fill an in-canvas rectangle with gray; boxes pass through unchanged."""
    _check_uint8(img)
    width, height = _canvas_size(img)
    x1, y1, x2, y2 = rect
    if not (0 <= x1 <= x2 <= width and 0 <= y1 <= y2 <= height):
        raise ValueError(f"cutout rect {rect} outside {width}x{height} canvas")
    out = img.copy()
    out[y1:y2, x1:x2] = FILL_VALUE
    return out, list(anns)


# --- geometric ops ----------------------------------------------------------


def hflip(img: np.ndarray, anns: Sequence[Annotation], width: int | None = None):
    """Mirror about the vertical axis; (x1,y1,x2,y2) -> (W-x2, y1, W-x1, y2)."""
    _check_uint8(img)
    w = width if width is not None else img.shape[1]
    flipped = [
        Annotation(a.class_id, BBox(w - a.bbox.x2, a.bbox.y1, w - a.bbox.x1, a.bbox.y2), a.status, a.source)
        for a in anns
    ]
    return np.ascontiguousarray(img[:, ::-1]), flipped


def vflip(img: np.ndarray, anns: Sequence[Annotation], height: int | None = None):
    _check_uint8(img)
    h = height if height is not None else img.shape[0]
    flipped = [
        Annotation(a.class_id, BBox(a.bbox.x1, h - a.bbox.y2, a.bbox.x2, h - a.bbox.y1), a.status, a.source)
        for a in anns
    ]
    return np.ascontiguousarray(img[::-1]), flipped


def _cos_sin(angle_deg: float) -> tuple[float, float]:
    """cos/sin with near-integer values snapped, so quarter turns are exact."""
    theta = math.radians(angle_deg)
    cos_t, sin_t = math.cos(theta), math.sin(theta)
    if abs(cos_t - round(cos_t)) < 1e-12:
        cos_t = float(round(cos_t))
    if abs(sin_t - round(sin_t)) < 1e-12:
        sin_t = float(round(sin_t))
    return cos_t, sin_t


def _rotate_raster(img: np.ndarray, cos_t: float, sin_t: float) -> np.ndarray:
    # Inverse-map about the pixel-grid center (W-1)/2, (H-1)/2, which is the
    # continuous-coordinate center W/2, H/2: pixel i samples position i + 0.5.
    matrix = np.array([[cos_t, -sin_t], [sin_t, cos_t]])  # (y, x) order
    h, w = img.shape[:2]
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    offset = center - matrix @ center
    def warp(plane):
        # grid-constant blends the fill at the borders instead of hard-filling
        # samples an epsilon outside the grid
        return ndimage.affine_transform(
            plane.astype(np.float64), matrix, offset=offset, order=1,
            mode="grid-constant", cval=float(FILL_VALUE),
        )
    if img.ndim == 2:
        return _to_uint8(warp(img))
    return _to_uint8(np.stack([warp(img[..., c]) for c in range(img.shape[2])], axis=-1))


def rotate(img: np.ndarray, anns: Sequence[Annotation], angle_deg: float):
    """Same-size rotation about the center, border fill 114.

    Boxes become the axis-aligned hull of their four rotated corners,
    clipped to the canvas with the 10% residual drop rule. Positive angles
    turn the content the same way the corner formula does, so painted
    boxes stay inside their transformed hulls.
    """
    _check_uint8(img)
    width, height = _canvas_size(img)
    if angle_deg % 360 == 0:
        return img.copy(), list(anns)
    cos_t, sin_t = _cos_sin(angle_deg)
    cx, cy = width / 2.0, height / 2.0
    hulls = []
    for ann in anns:
        b = ann.bbox
        corners = [(b.x1, b.y1), (b.x2, b.y1), (b.x2, b.y2), (b.x1, b.y2)]
        xs, ys = [], []
        for px, py in corners:
            dx, dy = px - cx, py - cy
            xs.append(cx + cos_t * dx - sin_t * dy)
            ys.append(cy + sin_t * dx + cos_t * dy)
        hulls.append(Annotation(ann.class_id, BBox(min(xs), min(ys), max(xs), max(ys)), ann.status, ann.source))
    return _rotate_raster(img, cos_t, sin_t), _clip_boxes(hulls, width, height)


def translate(img: np.ndarray, anns: Sequence[Annotation], offset: tuple[int, int]):
    """Shift by integer pixels, filling vacated area with gray.

    Boxes shift with the image and are clipped at the border under the
    10% residual drop rule.
    """
    _check_uint8(img)
    dx, dy = int(offset[0]), int(offset[1])
    width, height = _canvas_size(img)
    out = np.full_like(img, FILL_VALUE)
    src_x1, src_x2 = max(0, -dx), min(width, width - dx)
    src_y1, src_y2 = max(0, -dy), min(height, height - dy)
    if src_x2 > src_x1 and src_y2 > src_y1:
        out[src_y1 + dy : src_y2 + dy, src_x1 + dx : src_x2 + dx] = img[src_y1:src_y2, src_x1:src_x2]
    moved = [
        Annotation(a.class_id, a.bbox.translate(dx, dy), a.status, a.source) for a in anns
    ]
    return out, _clip_boxes(moved, width, height)


# --- plan generation and execution -------------------------------------------


@dataclass(frozen=True)
class AugmentSpec:
    """One concrete augmentation: an op plus its fully resolved parameters.

    Fractional cutout rectangles (params rx1/ry1/rx2/ry2) are scaled to the
    target image at execution time; everything else is absolute. ``seed``
    only matters for the noise op.
    """

    op: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.op not in OPS:
            raise ValueError(f"unknown augment op {self.op!r}")
        if self.op == "illumination" and not 0.35 <= self.params["w"] <= 1.0:
            raise ValueError("illumination weight outside [0.35, 1]")

    def to_record(self) -> dict:
        return {"op": self.op, "params": self.params, "seed": self.seed}

    @staticmethod
    def from_record(rec: dict) -> "AugmentSpec":
        return AugmentSpec(op=rec["op"], params=dict(rec.get("params", {})), seed=int(rec.get("seed", 0)))


def apply_spec(img: np.ndarray, anns: Sequence[Annotation], spec: AugmentSpec):
    """Execute one spec; returns (image, annotations)."""
    p = spec.params
    if spec.op == "illumination":
        return illumination(img, p["w"]), list(anns)
    if spec.op == "brightness":
        return brightness(img, anns, p["gain"])
    if spec.op == "noise":
        return noise(img, anns, p["sigma"], seed=spec.seed)
    if spec.op == "hflip":
        return hflip(img, anns)
    if spec.op == "vflip":
        return vflip(img, anns)
    if spec.op == "rotate":
        return rotate(img, anns, p["angle"])
    if spec.op == "translate":
        return translate(img, anns, (p["dx"], p["dy"]))
    if spec.op == "cutout":
        width, height = _canvas_size(img)
        rect = (
            int(p["rx1"] * width),
            int(p["ry1"] * height),
            int(p["rx2"] * width),
            int(p["ry2"] * height),
        )
        return cutout(img, anns, rect)
    raise ValueError(f"unknown augment op {spec.op!r}")


def _draw_spec(rng: np.random.Generator) -> AugmentSpec:
    op = OPS[int(rng.integers(0, len(OPS)))]
    seed = int(rng.integers(0, 2**31))
    if op == "rotate":
        params = {"angle": round(float(rng.uniform(-30.0, 30.0)), 3)}
    elif op == "translate":
        params = {"dx": int(rng.integers(-32, 33)), "dy": int(rng.integers(-32, 33))}
    elif op == "brightness":
        params = {"gain": round(float(rng.uniform(0.5, 1.5)), 4)}
    elif op == "noise":
        params = {"sigma": round(float(rng.uniform(0.0, 10.0)), 3)}
    elif op == "cutout":
        rx1 = float(rng.uniform(0.0, 0.7))
        ry1 = float(rng.uniform(0.0, 0.7))
        params = {
            "rx1": round(rx1, 4),
            "ry1": round(ry1, 4),
            "rx2": round(rx1 + float(rng.uniform(0.05, 0.3)), 4),
            "ry2": round(ry1 + float(rng.uniform(0.05, 0.3)), 4),
        }
    elif op == "illumination":
        params = {"w": round(float(rng.uniform(0.35, 1.0)), 4)}
    else:  # hflip / vflip
        params = {}
    return AugmentSpec(op=op, params=params, seed=seed)


def oversample_plan(
    class_images: Mapping[str, Sequence[str]],
    target_per_class: int,
    seed: int = 0,
) -> list[tuple[str, AugmentSpec]]:
    """Plan augmentations bringing every class's image count up to the target.

    For each deficient class, source images are drawn with replacement and
    paired with concrete specs; the plan is deterministic given the seed.
    Downsampling is refused: a class already above the target is an error,
    as is a class with no source images.
    """
    for cls in sorted(class_images):
        if len(class_images[cls]) == 0:
            raise ValueError(f"class {cls!r} has no source images")
        if len(class_images[cls]) > target_per_class:
            raise ValueError(
                f"class {cls!r} has {len(class_images[cls])} images, above target "
                f"{target_per_class}; downsampling is not supported"
            )
    rng = np.random.default_rng(seed)
    plan: list[tuple[str, AugmentSpec]] = []
    for cls in sorted(class_images):
        images = list(class_images[cls])
        deficit = target_per_class - len(images)
        for _ in range(deficit):
            src = images[int(rng.integers(0, len(images)))]
            plan.append((src, _draw_spec(rng)))
    return plan


def plan_to_jsonl(plan: Iterable[tuple[str, AugmentSpec]]) -> str:
    lines = []
    for image_id, spec in plan:
        rec = {"image_id": image_id}
        rec.update(spec.to_record())
        lines.append(json.dumps(rec, sort_keys=True) + "\n")
    return "".join(lines)


def plan_from_jsonl(text: str) -> list[tuple[str, AugmentSpec]]:
    plan = []
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        rec = json.loads(line)
        plan.append((rec["image_id"], AugmentSpec.from_record(rec)))
    return plan
