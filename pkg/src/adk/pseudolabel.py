"""Turn raw detections into proposed annotations and merge human corrections.

The proposal step is a confidence filter (inclusive, keep >= threshold)
followed by greedy hard NMS. Tie-breaking in the NMS sort is fully
deterministic (confidence desc, then class id, then box corners) so two
runs, or two implementations, agree box for box.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Sequence

from .geometry import Annotation, BBox, Detection, Source, Status, iou


@dataclass(frozen=True)
class PseudoLabelConfig:
    confidence_threshold: float = 0.25
    nms_iou: float = 0.45
    class_agnostic: bool = False

    def __post_init__(self):
        if not 0.0 < self.confidence_threshold < 1.0:
            raise ValueError("confidence threshold must lie in (0, 1)")
        if not 0.0 < self.nms_iou < 1.0:
            raise ValueError("NMS IoU threshold must lie in (0, 1)")


def detection_sort_key(d: Detection):
    """Deterministic visiting order: confidence desc, class, box corners."""
    b = d.bbox
    return (-d.confidence, d.class_id, b.x1, b.y1, b.x2, b.y2)


_sort_key = detection_sort_key


def nms(dets: Sequence[Detection], iou_thr: float, class_agnostic: bool = False) -> list[Detection]:
    """Greedy non-maximum suppression.

    Detections are visited in descending confidence (ties broken by class
    id, then lexicographic box corners). Each kept detection suppresses
    remaining detections of the same class (any class when agnostic) whose
    IoU with it strictly exceeds ``iou_thr``. Output order is keep order.
    """
    if not 0.0 < iou_thr < 1.0:
        raise ValueError("iou_thr must lie in (0, 1)")
    pending = sorted(dets, key=_sort_key)
    kept: list[Detection] = []
    while pending:
        top = pending.pop(0)
        kept.append(top)
        pending = [
            d
            for d in pending
            if not (
                (class_agnostic or d.class_id == top.class_id)
                and iou(d.bbox, top.bbox) > iou_thr
            )
        ]
    return kept


def propose_labels(raw: Iterable[Detection], cfg: PseudoLabelConfig = PseudoLabelConfig()) -> list[Annotation]:
    """Proposals from raw detections: threshold, NMS, then wrap as annotations.

    The confidence comparison is inclusive: a detection exactly at the
    threshold is kept. Every proposal carries status=proposed, source=model.
    """
    survivors = [d for d in raw if d.confidence >= cfg.confidence_threshold]
    survivors = nms(survivors, cfg.nms_iou, cfg.class_agnostic)
    return [
        Annotation(class_id=d.class_id, bbox=d.bbox, status=Status.PROPOSED, source=Source.MODEL)
        for d in survivors
    ]


@dataclass(frozen=True)
class Edit:
    """One reviewer decision against a proposal list.

    ``action`` is one of accept / reject / correct / add. The first three
    reference a proposal by its index in the proposed list; correct and add
    carry replacement geometry (and optionally a new class).
    """

    action: str
    index: int | None = None
    bbox: BBox | None = None
    class_id: int | None = None

    _ACTIONS = ("accept", "reject", "correct", "add")

    def __post_init__(self):
        if self.action not in self._ACTIONS:
            raise ValueError(f"unknown edit action {self.action!r}")
        if self.action == "add":
            if self.bbox is None or self.class_id is None:
                raise ValueError("add edit needs bbox and class_id")
        elif self.index is None:
            raise ValueError(f"{self.action} edit needs a proposal index")
        if self.action == "correct" and self.bbox is None and self.class_id is None:
            raise ValueError("correct edit changes nothing")


def merge_corrections(proposed: Sequence[Annotation], edits: Iterable[Edit]) -> list[Annotation]:
    """Apply reviewer edits to a proposal list, producing the final label set.

    Rejected proposals are removed. Corrected proposals carry the edited
    geometry/class with status=corrected. Added boxes come in as accepted,
    human-sourced annotations. Proposals without any edit stay proposed,
    which flags the review as incomplete.
    """
    result: list[Annotation | None] = list(proposed)
    additions: list[Annotation] = []
    for e in edits:
        if e.action == "add":
            additions.append(
                Annotation(class_id=e.class_id, bbox=e.bbox, status=Status.ACCEPTED, source=Source.HUMAN)
            )
            continue
        if e.index is None or not 0 <= e.index < len(proposed):
            raise IndexError(f"edit references unknown proposal index {e.index}")
        current = result[e.index]
        if current is None:
            raise ValueError(f"proposal {e.index} already rejected")
        if e.action == "reject":
            result[e.index] = None
        elif e.action == "accept":
            result[e.index] = current.with_status(Status.ACCEPTED)
        else:  # correct
            updated = Annotation(
                class_id=current.class_id if e.class_id is None else e.class_id,
                bbox=current.bbox if e.bbox is None else e.bbox,
                status=current.status,
                source=current.source,
            )
            result[e.index] = updated.with_status(Status.CORRECTED)
    return [a for a in result if a is not None] + additions


# --- detection JSON-lines interchange ------------------------------------
#
# One object per line: {image_id, class_id, x1, y1, x2, y2, confidence}.

def detection_to_record(image_id: str, det: Detection) -> dict:
    b = det.bbox
    return {
        "image_id": image_id,
        "class_id": det.class_id,
        "x1": b.x1,
        "y1": b.y1,
        "x2": b.x2,
        "y2": b.y2,
        "confidence": det.confidence,
    }


def write_detections_jsonl(path, dets_by_image: dict[str, Sequence[Detection]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for image_id in dets_by_image:
            for det in dets_by_image[image_id]:
                fh.write(json.dumps(detection_to_record(image_id, det)) + "\n")


def read_detections_jsonl(path) -> dict[str, list[Detection]]:
    """Parse a detections file into per-image lists, preserving line order."""
    out: dict[str, list[Detection]] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                det = Detection(
                    class_id=int(rec["class_id"]),
                    bbox=BBox(float(rec["x1"]), float(rec["y1"]), float(rec["x2"]), float(rec["y2"])),
                    confidence=float(rec["confidence"]),
                )
                image_id = str(rec["image_id"])
            except (KeyError, ValueError, TypeError, json.JSONDecodeError) as exc:
                raise ValueError(f"bad detection record on line {lineno}: {exc}") from exc
            out.setdefault(image_id, []).append(det)
    return out
