"""Annotation format I/O (YOLO txt, VOC xml, Labelme JSON) and the dataset split.

Class names, not indices, are the canonical identity across formats: VOC
stores names, YOLO stores indices, and indices are manifest-local. All
readers return pixel-space annotations.

The split shuffle is a fixed 64-bit linear congruential generator driving
a Fisher-Yates pass (see :func:`split_dataset`), so the same ids and seed
reproduce the same split in any implementation, on any platform.
"""

from __future__ import annotations

import json
import xml.etree.ElementTree as ET
from dataclasses import replace
from typing import Sequence

from .geometry import (
    Annotation,
    BBox,
    DatasetManifest,
    ImageRecord,
    NormBBox,
    Split,
    from_normalized,
    to_normalized,
)

# --- YOLO txt -------------------------------------------------------------


def read_yolo(text: str, width: int, height: int, classes: Sequence[str]) -> list[Annotation]:
    """Parse YOLO label text: one `class_id cx cy w h` line per box.

    Values are normalized center/size; the result is in pixel space.
    Malformed lines and out-of-range class ids raise with the line number.
    """
    anns: list[Annotation] = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 5:
            raise ValueError(f"line {lineno}: expected 5 fields, got {len(parts)}")
        try:
            class_id = int(parts[0])
            cx, cy, w, h = (float(p) for p in parts[1:])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        if not 0 <= class_id < len(classes):
            raise ValueError(f"line {lineno}: class_id {class_id} out of range")
        try:
            nb = NormBBox(cx, cy, w, h)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
        anns.append(Annotation(class_id=class_id, bbox=from_normalized(nb, width, height)))
    return anns


def write_yolo(anns: Sequence[Annotation], width: int, height: int) -> str:
    """Render annotations as YOLO text, six decimals, one trailing newline per line."""
    lines = []
    for ann in anns:
        nb = to_normalized(ann.bbox, width, height)
        lines.append(f"{ann.class_id} {nb.cx:.6f} {nb.cy:.6f} {nb.w:.6f} {nb.h:.6f}\n")
    return "".join(lines)


# --- VOC xml ---------------------------------------------------------------


def _require(parent: ET.Element, tag: str) -> ET.Element:
    el = parent.find(tag)
    if el is None:
        raise ValueError(f"missing required element <{tag}>")
    return el


def read_voc(xml_text: str, classes: Sequence[str]) -> list[Annotation]:
    """Parse a VOC annotation document.

    VOC stores 1-based integer pixel corners; they are shifted to 0-based
    continuous corners as (xmin-1, ymin-1, xmax, ymax). Unknown class
    names raise.
    """
    root = ET.fromstring(xml_text)
    anns: list[Annotation] = []
    for obj in root.findall("object"):
        name = _require(obj, "name").text or ""
        if name not in classes:
            raise ValueError(f"unknown class name {name!r}")
        bnd = _require(obj, "bndbox")
        xmin = float(_require(bnd, "xmin").text)
        ymin = float(_require(bnd, "ymin").text)
        xmax = float(_require(bnd, "xmax").text)
        ymax = float(_require(bnd, "ymax").text)
        anns.append(
            Annotation(
                class_id=list(classes).index(name),
                bbox=BBox(xmin - 1.0, ymin - 1.0, xmax, ymax),
            )
        )
    return anns


def voc_image_size(xml_text: str) -> tuple[int, int]:
    """(width, height) from a VOC document's <size> element."""
    root = ET.fromstring(xml_text)
    size = _require(root, "size")
    return int(_require(size, "width").text), int(_require(size, "height").text)


def write_voc(
    anns: Sequence[Annotation],
    classes: Sequence[str],
    filename: str,
    width: int,
    height: int,
) -> str:
    """Render annotations as a VOC document, restoring 1-based integer corners."""
    root = ET.Element("annotation")
    ET.SubElement(root, "filename").text = filename
    size = ET.SubElement(root, "size")
    ET.SubElement(size, "width").text = str(width)
    ET.SubElement(size, "height").text = str(height)
    ET.SubElement(size, "depth").text = "3"
    for ann in anns:
        obj = ET.SubElement(root, "object")
        ET.SubElement(obj, "name").text = classes[ann.class_id]
        ET.SubElement(obj, "difficult").text = "0"
        bnd = ET.SubElement(obj, "bndbox")
        b = ann.bbox
        ET.SubElement(bnd, "xmin").text = str(round(b.x1) + 1)
        ET.SubElement(bnd, "ymin").text = str(round(b.y1) + 1)
        ET.SubElement(bnd, "xmax").text = str(round(b.x2))
        ET.SubElement(bnd, "ymax").text = str(round(b.y2))
    ET.indent(root)
    return ET.tostring(root, encoding="unicode") + "\n"


# --- Labelme JSON ----------------------------------------------------------


def read_labelme(json_text: str, classes: Sequence[str]) -> tuple[list[Annotation], int]:
    """Parse Labelme JSON rectangles.

    Corner points may come in any order; they are normalized to
    (min, max) corners. Non-rectangle shapes are skipped; the second
    element of the result is the skip count.
    """
    doc = json.loads(json_text)
    anns: list[Annotation] = []
    skipped = 0
    for shape in doc.get("shapes", []):
        if shape.get("shape_type") != "rectangle":
            skipped += 1
            continue
        label = shape["label"]
        if label not in classes:
            raise ValueError(f"unknown class name {label!r}")
        (xa, ya), (xb, yb) = shape["points"]
        anns.append(
            Annotation(
                class_id=list(classes).index(label),
                bbox=BBox(min(xa, xb), min(ya, yb), max(xa, xb), max(ya, yb)),
            )
        )
    return anns, skipped


def labelme_image_size(json_text: str) -> tuple[int, int]:
    doc = json.loads(json_text)
    return int(doc["imageWidth"]), int(doc["imageHeight"])


def write_labelme(
    anns: Sequence[Annotation],
    classes: Sequence[str],
    image_path: str,
    width: int,
    height: int,
) -> str:
    """Render annotations as a Labelme document of rectangle shapes."""
    doc = {
        "version": "5.0.0",
        "flags": {},
        "shapes": [
            {
                "label": classes[a.class_id],
                "points": [[a.bbox.x1, a.bbox.y1], [a.bbox.x2, a.bbox.y2]],
                "group_id": None,
                "shape_type": "rectangle",
                "flags": {},
            }
            for a in anns
        ],
        "imagePath": image_path,
        "imageData": None,
        "imageHeight": height,
        "imageWidth": width,
    }
    return json.dumps(doc, indent=2) + "\n"


# --- manifest JSON ---------------------------------------------------------


def manifest_to_json(manifest: DatasetManifest) -> str:
    doc = {
        "classes": list(manifest.classes),
        "images": [
            {
                "id": im.id,
                "path": im.path,
                "width": im.width,
                "height": im.height,
                "split": im.split.value,
            }
            for im in manifest.images
        ],
    }
    if manifest.label_dir is not None:
        doc["label_dir"] = manifest.label_dir
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def manifest_from_json(text: str) -> DatasetManifest:
    doc = json.loads(text)
    images = tuple(
        ImageRecord(
            id=rec["id"],
            path=rec["path"],
            width=int(rec["width"]),
            height=int(rec["height"]),
            split=Split(rec.get("split", "unsplit")),
        )
        for rec in doc["images"]
    )
    return DatasetManifest(
        classes=tuple(doc["classes"]),
        images=images,
        label_dir=doc.get("label_dir"),
    )


# --- split -----------------------------------------------------------------

_LCG_MUL = 6364136223846793005
_LCG_INC = 1442695040888963407
_MASK64 = (1 << 64) - 1


def _lcg_next(state: int) -> int:
    return (state * _LCG_MUL + _LCG_INC) & _MASK64


def lcg_shuffle(n: int, seed: int) -> list[int]:
    """Seeded Fisher-Yates permutation of range(n), stable across platforms.

    The generator is the 64-bit LCG state' = state * 6364136223846793005
    + 1442695040888963407 (mod 2^64), seeded directly with ``seed``; each
    swap index is (state >> 32) mod (i + 1) for i = n-1 .. 1.
    """
    order = list(range(n))
    state = seed & _MASK64
    for i in range(n - 1, 0, -1):
        state = _lcg_next(state)
        j = (state >> 32) % (i + 1)
        order[i], order[j] = order[j], order[i]
    return order


def split_sizes(n: int, ratios: tuple[float, float, float]) -> tuple[int, int, int]:
    """Partition sizes floor(n * r / sum) with the remainder assigned train-first."""
    if any(r <= 0 for r in ratios):
        raise ValueError("ratios must be positive")
    total = sum(ratios)
    sizes = [int(n * r // total) for r in ratios]
    remainder = n - sum(sizes)
    for i in range(remainder):
        sizes[i % 3] += 1
    return tuple(sizes)


def split_dataset(
    manifest: DatasetManifest,
    ratios: tuple[float, float, float] = (8, 1, 1),
    seed: int = 0,
    group_by_source: bool = False,
) -> DatasetManifest:
    """Assign train/val/test splits by seeded permutation.

    Sizes depend only on the image count and ratios, never on the seed.
    With ``group_by_source`` images sharing the id prefix before the last
    ``_r{row}_c{col}`` tile suffix travel together, so tiles of one source
    image never straddle a split boundary.
    """
    images = manifest.images
    n_train, n_val, n_test = split_sizes(len(images), ratios)
    assigned = list(images)
    splits = (Split.TRAIN, Split.VAL, Split.TEST)
    if group_by_source:
        # Whole groups move together, so sizes are met only up to group
        # granularity: each group goes to the split with the largest
        # remaining deficit (ties favor train, then val).
        groups: dict[str, list[int]] = {}
        for idx, im in enumerate(images):
            groups.setdefault(_source_key(im.id), []).append(idx)
        keys = sorted(groups)
        counts = [0, 0, 0]
        targets = [n_train, n_val, n_test]
        for key_idx in lcg_shuffle(len(keys), seed):
            members = groups[keys[key_idx]]
            deficits = [targets[s] - counts[s] for s in range(3)]
            s = deficits.index(max(deficits))
            counts[s] += len(members)
            for idx in members:
                assigned[idx] = replace(images[idx], split=splits[s])
    else:
        order = lcg_shuffle(len(images), seed)
        for pos, idx in enumerate(order):
            if pos < n_train:
                split = Split.TRAIN
            elif pos < n_train + n_val:
                split = Split.VAL
            else:
                split = Split.TEST
            assigned[idx] = replace(images[idx], split=split)
    return DatasetManifest(classes=manifest.classes, images=tuple(assigned), label_dir=manifest.label_dir)


def _source_key(image_id: str) -> str:
    # {source}_r{row}_c{col} -> {source}; anything else is its own group
    parts = image_id.rsplit("_", 2)
    if (
        len(parts) == 3
        and parts[1].startswith("r")
        and parts[1][1:].isdigit()
        and parts[2].startswith("c")
        and parts[2][1:].isdigit()
    ):
        return parts[0]
    return image_id


# --- ground truth loading helper -------------------------------------------


def read_yolo_file(path, width: int, height: int, classes: Sequence[str]) -> list[Annotation]:
    with open(path, "r", encoding="utf-8") as fh:
        return read_yolo(fh.read(), width, height, classes)


def write_yolo_file(path, anns: Sequence[Annotation], width: int, height: int) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(write_yolo(anns, width, height))
