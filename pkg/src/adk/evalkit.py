"""Detection evaluation: matching, precision/recall/F1, average precision,
mAP over IoU thresholds, confusion matrices, and dataset statistics.

Matching is the greedy convention: predictions in descending confidence,
each taking the unmatched ground-truth box it overlaps best, provided the
IoU clears the threshold. Duplicate hits on an already-matched box count
as false positives. The PR curve uses all-points interpolation (monotone
precision envelope, exact integration over recall); this choice is pinned
down here because 11-point and 101-point variants give different numbers
on the same predictions.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .geometry import (
    Annotation,
    DatasetManifest,
    Detection,
    SizeClass,
    SizeThresholds,
    Split,
    iou,
    size_class,
)
from .pseudolabel import detection_sort_key

MAP_5095_THRESHOLDS = tuple(round(0.50 + 0.05 * i, 2) for i in range(10))


@dataclass(frozen=True)
class MatchResult:
    """Outcome of matching one image's predictions of one class."""

    pred_is_tp: tuple[bool, ...]
    gt_matched: tuple[bool, ...]
    matches: tuple[tuple[int, int, float], ...]  # (pred index, gt index, IoU)
    tp: int
    fp: int
    fn: int


def match(preds: Sequence[Detection], gts: Sequence[Annotation], iou_thr: float) -> MatchResult:
    """Greedy one-to-one matching for a single image, single class.

    Guarantees tp + fn == len(gts) and that each ground-truth box is
    matched at most once.
    """
    order = sorted(range(len(preds)), key=lambda i: detection_sort_key(preds[i]))
    pred_is_tp = [False] * len(preds)
    gt_matched = [False] * len(gts)
    matches = []
    for i in order:
        best_j, best_iou = -1, 0.0
        for j, gt in enumerate(gts):
            if gt_matched[j]:
                continue
            v = iou(preds[i].bbox, gt.bbox)
            if v > best_iou:
                best_j, best_iou = j, v
        if best_j >= 0 and best_iou >= iou_thr:
            pred_is_tp[i] = True
            gt_matched[best_j] = True
            matches.append((i, best_j, best_iou))
    tp = sum(pred_is_tp)
    return MatchResult(
        pred_is_tp=tuple(pred_is_tp),
        gt_matched=tuple(gt_matched),
        matches=tuple(matches),
        tp=tp,
        fp=len(preds) - tp,
        fn=len(gts) - tp,
    )


@dataclass(frozen=True)
class PRF1:
    precision: float
    recall: float
    f1: float
    degenerate: bool  # true when any denominator was zero


def prf1(tp: int, fp: int, fn: int) -> PRF1:
    """P = TP/(TP+FP), R = TP/(TP+FN), F1 = 2PR/(P+R).

    Zero denominators yield 0 for the affected value and set the
    degenerate flag, keeping report aggregation total instead of NaN-laden.
    """
    if min(tp, fp, fn) < 0:
        raise ValueError("counts must be non-negative")
    degenerate = False
    if tp + fp > 0:
        p = tp / (tp + fp)
    else:
        p, degenerate = 0.0, True
    if tp + fn > 0:
        r = tp / (tp + fn)
    else:
        r, degenerate = 0.0, True
    if p + r > 0:
        f1 = 2.0 * p * r / (p + r)
    else:
        f1, degenerate = 0.0, True
    return PRF1(p, r, f1, degenerate)


def _as_by_image(obj) -> Mapping[str, Sequence]:
    if isinstance(obj, Mapping):
        return obj
    return {"": obj}  # a bare list is a single unnamed image


def average_precision(preds_by_image, gts_by_image, iou_thr: float) -> float:
    """All-points-interpolated AP for one class across a set of images.

    Both arguments map image id to box lists (a bare list is treated as
    one image). Predictions never match across image boundaries.
    """
    preds_by_image = _as_by_image(preds_by_image)
    gts_by_image = _as_by_image(gts_by_image)
    n_gt = sum(len(v) for v in gts_by_image.values())
    scored: list[tuple[float, str, int, bool]] = []
    for image_id in preds_by_image:
        preds = list(preds_by_image[image_id])
        gts = list(gts_by_image.get(image_id, ()))
        result = match(preds, gts, iou_thr)
        for i, d in enumerate(preds):
            scored.append((-d.confidence, str(image_id), i, result.pred_is_tp[i]))
    if n_gt == 0 or not scored:
        return 0.0
    scored.sort(key=lambda t: t[:3])
    flags = np.array([s[3] for s in scored], dtype=np.float64)
    cum_tp = np.cumsum(flags)
    cum_fp = np.cumsum(1.0 - flags)
    recall = cum_tp / n_gt
    precision = cum_tp / (cum_tp + cum_fp)
    # monotone envelope from the right, then exact integration over recall
    envelope = np.maximum.accumulate(precision[::-1])[::-1]
    prev_r = np.concatenate(([0.0], recall[:-1]))
    return float(((recall - prev_r) * envelope).sum())


@dataclass(frozen=True)
class MapReport:
    per_class: dict  # class_id -> {threshold -> AP}
    per_threshold: dict  # threshold -> mAP over classes
    mean: float  # mean over thresholds of per-class means


def _slice_class(dets_by_image: Mapping[str, Sequence], class_id: int) -> dict:
    return {
        img: [d for d in dets if d.class_id == class_id] for img, dets in dets_by_image.items()
    }


def map_at(preds_by_image, gts_by_image, thresholds: Sequence[float]) -> MapReport:
    """Per-class AP at each threshold, averaged class-first then threshold.

    Classes are those present in the ground truth; predictions of absent
    classes contribute nothing (their AP is undefined, not zero).
    """
    if not thresholds:
        raise ValueError("thresholds must be non-empty")
    preds_by_image = _as_by_image(preds_by_image)
    gts_by_image = _as_by_image(gts_by_image)
    classes = sorted({a.class_id for gts in gts_by_image.values() for a in gts})
    per_class: dict[int, dict[float, float]] = {c: {} for c in classes}
    per_threshold: dict[float, float] = {}
    for thr in thresholds:
        aps = []
        for c in classes:
            ap = average_precision(_slice_class(preds_by_image, c), _slice_class(gts_by_image, c), thr)
            per_class[c][thr] = ap
            aps.append(ap)
        per_threshold[thr] = float(np.mean(aps)) if aps else 0.0
    mean = float(np.mean(list(per_threshold.values())))
    return MapReport(per_class=per_class, per_threshold=per_threshold, mean=mean)


def confusion_counts(
    preds_by_image,
    gts_by_image,
    num_classes: int,
    conf_thr: float = 0.25,
    iou_thr: float = 0.5,
) -> np.ndarray:
    """(C+1) x (C+1) count matrix; last row/column is background.

    Rows are the true class, columns the predicted class. Matching runs in
    two stages: class-aware first, so the diagonal carries exactly the
    matcher's true positives, then class-agnostic among the leftovers to
    attribute cross-class confusion. Whatever remains hits background.
    """
    m = np.zeros((num_classes + 1, num_classes + 1), dtype=np.int64)
    bg = num_classes
    preds_by_image = _as_by_image(preds_by_image)
    gts_by_image = _as_by_image(gts_by_image)
    for image_id in sorted(set(preds_by_image) | set(gts_by_image)):
        preds = [d for d in preds_by_image.get(image_id, ()) if d.confidence >= conf_thr]
        gts = list(gts_by_image.get(image_id, ()))
        pred_used = [False] * len(preds)
        gt_used = [False] * len(gts)
        for c in range(num_classes):
            idx_p = [i for i, d in enumerate(preds) if d.class_id == c]
            idx_g = [j for j, g in enumerate(gts) if g.class_id == c]
            res = match([preds[i] for i in idx_p], [gts[j] for j in idx_g], iou_thr)
            for pi, gj, _ in res.matches:
                m[c, c] += 1
                pred_used[idx_p[pi]] = True
                gt_used[idx_g[gj]] = True
        # second pass ignores class labels to catch misclassified overlaps
        leftovers = sorted(
            (i for i in range(len(preds)) if not pred_used[i]),
            key=lambda i: detection_sort_key(preds[i]),
        )
        for i in leftovers:
            best_j, best_iou = -1, 0.0
            for j in range(len(gts)):
                if gt_used[j]:
                    continue
                v = iou(preds[i].bbox, gts[j].bbox)
                if v > best_iou:
                    best_j, best_iou = j, v
            if best_j >= 0 and best_iou >= iou_thr:
                m[gts[best_j].class_id, preds[i].class_id] += 1
                pred_used[i] = True
                gt_used[best_j] = True
        for j in range(len(gts)):
            if not gt_used[j]:
                m[gts[j].class_id, bg] += 1
        for i in range(len(preds)):
            if not pred_used[i]:
                m[bg, preds[i].class_id] += 1
    return m


def confusion_matrix(
    preds_by_image,
    gts_by_image,
    num_classes: int,
    conf_thr: float = 0.25,
    iou_thr: float = 0.5,
) -> np.ndarray:
    """Column-normalized confusion matrix; empty columns stay all-zero."""
    counts = confusion_counts(preds_by_image, gts_by_image, num_classes, conf_thr, iou_thr).astype(
        np.float64
    )
    sums = counts.sum(axis=0, keepdims=True)
    return np.divide(counts, sums, out=np.zeros_like(counts), where=sums > 0)


@dataclass(frozen=True)
class ClassEval:
    precision: float
    recall: float
    f1: float
    ap50: float
    ap5095: float
    degenerate: bool


@dataclass(frozen=True)
class EvalReport:
    per_class: dict  # class_id -> ClassEval
    map50: float
    map5095: float
    confusion: np.ndarray  # column-normalized, background last


def evaluate(
    preds_by_image,
    gts_by_image,
    num_classes: int,
    conf_thr: float = 0.25,
    iou_thr: float = 0.5,
) -> EvalReport:
    """Full report: per-class P/R/F1 at the operating point, AP tables,
    and the column-normalized confusion matrix.

    P/R/F1 count only predictions at or above ``conf_thr``; AP and mAP use
    every prediction, ranked by confidence, as usual.
    """
    preds_by_image = _as_by_image(preds_by_image)
    gts_by_image = _as_by_image(gts_by_image)
    report5095 = map_at(preds_by_image, gts_by_image, MAP_5095_THRESHOLDS)
    classes = sorted(report5095.per_class)
    per_class = {}
    for c in classes:
        tp = fp = fn = 0
        for image_id in sorted(set(preds_by_image) | set(gts_by_image)):
            preds = [
                d
                for d in preds_by_image.get(image_id, ())
                if d.class_id == c and d.confidence >= conf_thr
            ]
            gts = [g for g in gts_by_image.get(image_id, ()) if g.class_id == c]
            res = match(preds, gts, iou_thr)
            tp, fp, fn = tp + res.tp, fp + res.fp, fn + res.fn
        scores = prf1(tp, fp, fn)
        ap_table = report5095.per_class[c]
        per_class[c] = ClassEval(
            precision=scores.precision,
            recall=scores.recall,
            f1=scores.f1,
            ap50=ap_table[0.5],
            ap5095=float(np.mean(list(ap_table.values()))),
            degenerate=scores.degenerate,
        )
    return EvalReport(
        per_class=per_class,
        map50=report5095.per_threshold[0.5],
        map5095=report5095.mean,
        confusion=confusion_matrix(preds_by_image, gts_by_image, num_classes, conf_thr, iou_thr),
    )


def report_to_json(report: EvalReport, class_names: Sequence[str] | None = None) -> str:
    def name(c: int) -> str:
        return class_names[c] if class_names else str(c)

    payload = {
        "per_class": {
            name(c): {
                "precision": e.precision,
                "recall": e.recall,
                "f1": e.f1,
                "ap50": e.ap50,
                "ap50_95": e.ap5095,
                "degenerate": e.degenerate,
            }
            for c, e in sorted(report.per_class.items())
        },
        "map50": report.map50,
        "map50_95": report.map5095,
        "confusion": report.confusion.tolist(),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def report_table(report: EvalReport, class_names: Sequence[str] | None = None) -> str:
    """Plain-text table, columns ordered P, R, mAP@.5, mAP@.5:.95, F1."""

    def name(c: int) -> str:
        return class_names[c] if class_names else str(c)

    rows = [("class", "P", "R", "mAP@.5", "mAP@.5:.95", "F1")]
    for c, e in sorted(report.per_class.items()):
        rows.append(
            (name(c), f"{e.precision:.3f}", f"{e.recall:.3f}", f"{e.ap50:.3f}", f"{e.ap5095:.3f}", f"{e.f1:.3f}")
        )
    if report.per_class:
        mp = float(np.mean([e.precision for e in report.per_class.values()]))
        mr = float(np.mean([e.recall for e in report.per_class.values()]))
        mf = float(np.mean([e.f1 for e in report.per_class.values()]))
    else:
        mp = mr = mf = 0.0
    rows.append(("all", f"{mp:.3f}", f"{mr:.3f}", f"{report.map50:.3f}", f"{report.map5095:.3f}", f"{mf:.3f}"))
    widths = [max(len(r[i]) for r in rows) for i in range(6)]
    lines = ["  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)).rstrip() for row in rows]
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class SplitStats:
    images: int
    targeted: int       # images with at least one instance
    untargeted: int     # images with none (or an unreadable label file)
    instances: int
    small: int
    medium: int
    large: int

    @property
    def instances_per_targeted(self) -> float:
        return self.instances / self.targeted if self.targeted else 0.0


def dataset_stats(
    manifest: DatasetManifest,
    labels: Mapping[str, Sequence[Annotation] | None],
    thresholds: SizeThresholds = SizeThresholds(),
) -> dict[str, SplitStats]:
    """Per-split image/instance tallies plus an "all" aggregate.

    An image whose labels are absent is counted as untargeted, with a
    warning, rather than failing the whole run. Small/medium/large counts
    always sum to the instance count.
    """
    buckets: dict[str, dict[str, int]] = {}

    def bucket(key: str) -> dict[str, int]:
        return buckets.setdefault(
            key, {"images": 0, "targeted": 0, "untargeted": 0, "instances": 0, "s": 0, "m": 0, "l": 0}
        )

    for rec in manifest.images:
        keys = ["all"]
        if rec.split is not Split.UNSPLIT:
            keys.append(rec.split.value)
        anns = labels.get(rec.id)
        if anns is None and rec.id not in labels:
            warnings.warn(f"no labels for image {rec.id!r}; counted as untargeted", stacklevel=2)
        anns = anns or ()
        for key in keys:
            b = bucket(key)
            b["images"] += 1
            b["targeted" if anns else "untargeted"] += 1
            b["instances"] += len(anns)
            for a in anns:
                cls = size_class(a.bbox, thresholds)
                b["s" if cls is SizeClass.S else "m" if cls is SizeClass.M else "l"] += 1
    return {
        key: SplitStats(
            images=b["images"],
            targeted=b["targeted"],
            untargeted=b["untargeted"],
            instances=b["instances"],
            small=b["s"],
            medium=b["m"],
            large=b["l"],
        )
        for key, b in sorted(buckets.items())
    }


def stats_to_json(stats: Mapping[str, SplitStats]) -> str:
    payload = {
        key: {
            "images": s.images,
            "targeted": s.targeted,
            "untargeted": s.untargeted,
            "instances": s.instances,
            "small": s.small,
            "medium": s.medium,
            "large": s.large,
            "instances_per_targeted": s.instances_per_targeted,
        }
        for key, s in stats.items()
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
