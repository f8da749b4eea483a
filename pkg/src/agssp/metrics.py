"""Evaluation metrics: ranking AUROC, mask/box IoU, and COCO-style mAP.

AUROC is the Mann-Whitney statistic computed by sort-and-midrank; average
precision uses greedy score-descending matching and 101-point interpolation
over the precision envelope.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateLabels, SizeMismatch

COCO_IOU_THRESHOLDS = tuple(np.arange(50, 100, 5) / 100.0)


@dataclass(frozen=True)
class Detection:
    image_id: int
    bbox: tuple[float, float, float, float]
    class_id: int
    score: float

    def __post_init__(self) -> None:
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise ValueError(f"detection bbox must have positive extents: {self.bbox}")


@dataclass(frozen=True)
class GroundTruth:
    image_id: int
    bbox: tuple[float, float, float, float]
    class_id: int

    def __post_init__(self) -> None:
        if self.bbox[2] <= 0 or self.bbox[3] <= 0:
            raise ValueError(f"ground-truth bbox must have positive extents: {self.bbox}")


@dataclass
class PRCurve:
    recalls: list[float] = field(default_factory=list)
    precisions: list[float] = field(default_factory=list)
    ap: float = 0.0


def auroc(scores, labels) -> float:
    """P(random positive outscores a random negative), ties counting half.

    Computed from midranks in O(n log n); equivalent to pairwise counting.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise SizeMismatch("scores and labels must be equal-length 1D sequences")
    n_pos = int((labels == 1).sum())
    n_neg = int((labels == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateLabels("need at least one positive and one negative label")

    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # midrank, 1-based
        i = j + 1
    rank_sum = float(ranks[labels == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def pixel_auroc(maps, gt_masks, subsample: int | None = None) -> float:
    """AUROC over all (pixel score, pixel label) pairs of paired maps/masks.

    ``subsample`` keeps every n-th flattened pixel to bound memory.
    """
    stride = 1 if subsample is None else int(subsample)
    if stride < 1:
        raise ValueError("subsample stride must be >= 1")
    scores = []
    labels = []
    for anomaly_map, mask in zip(maps, gt_masks):
        anomaly_map = np.asarray(anomaly_map)
        mask = np.asarray(mask)
        if anomaly_map.shape != mask.shape:
            raise SizeMismatch(
                f"map shape {anomaly_map.shape} != mask shape {mask.shape}"
            )
        scores.append(anomaly_map.reshape(-1)[::stride])
        labels.append(mask.reshape(-1)[::stride].astype(np.int64))
    if not scores:
        raise DegenerateLabels("no maps given")
    return auroc(np.concatenate(scores), np.concatenate(labels))


def mask_iou(pred: np.ndarray, gt: np.ndarray) -> float:
    """Intersection over union of two binary masks; 1.0 when both are empty."""
    pred = np.asarray(pred, dtype=bool)
    gt = np.asarray(gt, dtype=bool)
    if pred.shape != gt.shape:
        raise SizeMismatch(f"mask shapes differ: {pred.shape} vs {gt.shape}")
    union = int(np.logical_or(pred, gt).sum())
    if union == 0:
        return 1.0
    inter = int(np.logical_and(pred, gt).sum())
    return inter / union


def box_iou(a, b) -> float:
    """IoU of two (x, y, w, h) axis-aligned boxes."""
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    iw = min(ax + aw, bx + bw) - max(ax, bx)
    ih = min(ay + ah, by + bh) - max(ay, by)
    if iw <= 0 or ih <= 0:
        return 0.0
    inter = iw * ih
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def _greedy_outcomes(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    iou_threshold: float,
) -> list[bool]:
    """True/false-positive flags in score-descending order (insertion-order ties)."""
    order = sorted(range(len(detections)), key=lambda i: (-detections[i].score, i))
    by_image: dict[int, list[int]] = {}
    for j, gt in enumerate(ground_truths):
        by_image.setdefault(gt.image_id, []).append(j)
    taken = [False] * len(ground_truths)
    outcomes = []
    for i in order:
        det = detections[i]
        best_j, best_iou = -1, 0.0
        for j in by_image.get(det.image_id, ()):
            if taken[j]:
                continue
            iou = box_iou(det.bbox, ground_truths[j].bbox)
            if iou >= iou_threshold and iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            taken[best_j] = True
            outcomes.append(True)
        else:
            outcomes.append(False)
    return outcomes


def average_precision(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    iou_threshold: float,
) -> PRCurve:
    """Single-class PR curve with 101-point interpolated average precision."""
    n_gt = len(ground_truths)
    if n_gt == 0 or not detections:
        return PRCurve(ap=0.0)
    hits = np.array(_greedy_outcomes(detections, ground_truths, iou_threshold))
    tp = np.cumsum(hits)
    ranks = np.arange(1, len(hits) + 1)
    recalls = tp / n_gt
    precisions = tp / ranks

    envelope = np.maximum.accumulate(precisions[::-1])[::-1]
    grid = np.arange(101) / 100.0
    idx = np.searchsorted(recalls, grid - 1e-12, side="left")
    sampled = np.where(idx < len(envelope), envelope[np.minimum(idx, len(envelope) - 1)], 0.0)
    return PRCurve(
        recalls=recalls.tolist(),
        precisions=precisions.tolist(),
        ap=float(sampled.mean()),
    )


def mean_ap(
    detections: list[Detection],
    ground_truths: list[GroundTruth],
    iou_thresholds=COCO_IOU_THRESHOLDS,
) -> dict:
    """mAP@0.5 and the mean over the 0.50:0.95 threshold ladder, per class.

    Classes are every class id present in detections or ground truths; a class
    with detections but no ground truth scores zero.
    """
    classes = sorted(
        {d.class_id for d in detections} | {g.class_id for g in ground_truths}
    )
    per_class: dict[int, dict[str, float]] = {}
    for cls in classes:
        dets = [d for d in detections if d.class_id == cls]
        gts = [g for g in ground_truths if g.class_id == cls]
        aps = [average_precision(dets, gts, t).ap for t in iou_thresholds]
        ap50 = average_precision(dets, gts, 0.5).ap
        per_class[cls] = {"ap50": ap50, "ap5095": float(np.mean(aps)) if aps else 0.0}
    if not classes:
        return {"map50": 0.0, "map5095": 0.0, "per_class": {}}
    return {
        "map50": float(np.mean([v["ap50"] for v in per_class.values()])),
        "map5095": float(np.mean([v["ap5095"] for v in per_class.values()])),
        "per_class": per_class,
    }
