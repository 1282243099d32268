"""Anchor-box clustering over (width, height) pairs.

The interesting metric is overlap, not distance: two boxes pinned to a
common origin compare by IoU, and k-means runs on d = 1 - IoU. Cluster
updates use the per-dimension median, but each update is guarded so the
summed assignment cost can only go down; this keeps the cost history
monotonically nonincreasing, which plain median updates do not guarantee
under the IoU metric. A conventional Euclidean mode is available too.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


def pairwise_iou_wh(boxes: np.ndarray, anchors: np.ndarray) -> np.ndarray:
    """IoU of origin-anchored (w, h) pairs; (n, 2) x (k, 2) -> (n, k)."""
    boxes = np.asarray(boxes, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    inter = np.minimum(boxes[:, None, 0], anchors[None, :, 0]) * np.minimum(
        boxes[:, None, 1], anchors[None, :, 1]
    )
    union = boxes[:, 0:1] * boxes[:, 1:2] + (anchors[:, 0] * anchors[:, 1])[None, :] - inter
    return inter / union


def anchor_fitness(boxes: np.ndarray, anchors: np.ndarray) -> float:
    """Mean best-anchor IoU over the boxes; 1.0 means a perfect cover."""
    boxes = np.asarray(boxes, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    if boxes.size == 0 or anchors.size == 0:
        raise ValueError("boxes and anchors must be non-empty")
    return float(pairwise_iou_wh(boxes, anchors).max(axis=1).mean())


def _distances(boxes: np.ndarray, centers: np.ndarray, metric: str) -> np.ndarray:
    if metric == "iou":
        return 1.0 - pairwise_iou_wh(boxes, centers)
    diff = boxes[:, None, :] - centers[None, :, :]
    return np.sqrt((diff * diff).sum(axis=2))


def _init_plusplus(boxes: np.ndarray, k: int, rng: np.random.Generator, metric: str) -> np.ndarray:
    """k-means++ seeding: next center drawn with probability proportional
    to squared distance from the nearest already chosen center."""
    n = boxes.shape[0]
    centers = np.empty((k, 2), dtype=np.float64)
    centers[0] = boxes[int(rng.integers(0, n))]
    best = _distances(boxes, centers[:1], metric)[:, 0]
    for i in range(1, k):
        weights = best * best
        total = weights.sum()
        if total <= 0:
            idx = int(rng.integers(0, n))  # all points coincide with a center
        else:
            idx = int(rng.choice(n, p=weights / total))
        centers[i] = boxes[idx]
        best = np.minimum(best, _distances(boxes, centers[i : i + 1], metric)[:, 0])
    return centers


@dataclass(frozen=True)
class AnchorResult:
    anchors: np.ndarray        # (k, 2), sorted by area ascending
    fitness: float             # mean best IoU of boxes against the anchors
    iterations: int
    cost_history: tuple[float, ...]  # summed assignment cost after each iteration


def kmeans_anchors(
    boxes: np.ndarray,
    k: int,
    seed: int = 0,
    max_iter: int = 300,
    metric: str = "iou",
) -> AnchorResult:
    """Cluster (w, h) pairs into k anchors.

    Guarantees: deterministic for a given seed, and cost_history is
    monotonically nonincreasing (each median update is accepted only if it
    does not worsen its cluster's summed cost; reassignment never can).
    """
    boxes = np.asarray(boxes, dtype=np.float64)
    if boxes.ndim != 2 or boxes.shape[1] != 2:
        raise ValueError(f"expected (n, 2) width/height array, got {boxes.shape}")
    if np.any(boxes <= 0) or not np.all(np.isfinite(boxes)):
        raise ValueError("box dimensions must be finite and positive")
    n = boxes.shape[0]
    n_distinct = np.unique(boxes, axis=0).shape[0]
    if not 1 <= k <= n_distinct:
        raise ValueError(f"k={k} outside [1, {n_distinct} distinct box shapes]")
    if metric not in ("iou", "euclidean"):
        raise ValueError(f"unknown metric {metric!r}")

    rng = np.random.default_rng(seed)
    centers = _init_plusplus(boxes, k, rng, metric)
    assign = np.full(n, -1, dtype=np.int64)
    history: list[float] = []
    iterations = 0

    for iterations in range(1, max_iter + 1):
        dists = _distances(boxes, centers, metric)
        new_assign = dists.argmin(axis=1)
        cost = float(dists[np.arange(n), new_assign].sum())

        # Revive empty clusters at the worst-served point; the point's cost
        # drops to zero there, so the total still cannot increase.
        for c in range(k):
            if not np.any(new_assign == c):
                worst = int(dists[np.arange(n), new_assign].argmax())
                centers[c] = boxes[worst]
                dists = _distances(boxes, centers, metric)
                new_assign = dists.argmin(axis=1)
                cost = float(dists[np.arange(n), new_assign].sum())

        history.append(cost)
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign

        for c in range(k):
            members = boxes[assign == c]
            if members.shape[0] == 0:
                continue
            candidate = (
                np.median(members, axis=0) if metric == "iou" else members.mean(axis=0)
            )
            old_cost = _distances(members, centers[c : c + 1], metric)[:, 0].sum()
            new_cost = _distances(members, candidate[None, :], metric)[:, 0].sum()
            if new_cost <= old_cost:
                centers[c] = candidate

    order = np.argsort(centers[:, 0] * centers[:, 1], kind="stable")
    anchors = centers[order]
    return AnchorResult(
        anchors=anchors,
        fitness=anchor_fitness(boxes, anchors),
        iterations=iterations,
        cost_history=tuple(history),
    )
