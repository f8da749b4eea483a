"""Brute-force reference implementations used by the test suite.

Each function recomputes a production operation with the most naive correct
algorithm available and shares no helper with the production path. They are
deliberately slow; nothing outside the tests should import this module.
"""

from __future__ import annotations

import numpy as np


def flood_fill_labels(mask: np.ndarray, connectivity: int = 8) -> np.ndarray:
    """Label connected true-pixels by explicit stack-based flood fill.

    Labels are assigned 1, 2, ... in raster order of each component's first
    pixel; background stays 0.
    """
    mask = np.asarray(mask, dtype=bool)
    h, w = mask.shape
    if connectivity == 8:
        offsets = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1)]
    elif connectivity == 4:
        offsets = [(-1, 0), (0, -1), (0, 1), (1, 0)]
    else:
        raise ValueError("connectivity must be 4 or 8")
    labels = np.zeros((h, w), dtype=np.int64)
    next_label = 0
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or labels[y, x]:
                continue
            next_label += 1
            stack = [(y, x)]
            labels[y, x] = next_label
            while stack:
                cy, cx = stack.pop()
                for dy, dx in offsets:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = next_label
                        stack.append((ny, nx))
    return labels


def _iou_xywh(a: tuple, b: tuple) -> float:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    ix = max(0.0, min(ax + aw, bx + bw) - max(ax, bx))
    iy = max(0.0, min(ay + ah, by + bh) - max(ay, by))
    inter = ix * iy
    union = aw * ah + bw * bh - inter
    return inter / union if union > 0 else 0.0


def nms_reference(boxes: list[tuple], iou_threshold: float) -> list[tuple]:
    """Quadratic greedy suppression over (x, y, w, h, score) tuples.

    Candidates are ordered by score descending, then larger area, then raster
    position; a survivor removes every later box overlapping it by strictly
    more than the threshold.
    """
    pending = sorted(
        boxes,
        key=lambda b: (-b[4], -(b[2] * b[3]), b[1], b[0], b[2], b[3]),
    )
    kept: list[tuple] = []
    while pending:
        best = pending.pop(0)
        kept.append(best)
        pending = [b for b in pending if not _iou_xywh(best[:4], b[:4]) > iou_threshold]
    return kept


def auroc_pairwise(scores: list[float], labels: list[int]) -> float:
    """AUROC by counting positive/negative pairs directly."""
    pos = np.asarray([s for s, l in zip(scores, labels) if l == 1], dtype=np.float64)
    neg = np.asarray([s for s, l in zip(scores, labels) if l == 0], dtype=np.float64)
    if len(pos) == 0 or len(neg) == 0:
        raise ValueError("need both classes")
    wins = (pos[:, None] > neg[None, :]).sum()
    ties = (pos[:, None] == neg[None, :]).sum()
    return (wins + 0.5 * ties) / (len(pos) * len(neg))


def pr_curve_reference(
    detections: list[tuple],
    ground_truths: list[tuple],
    iou_threshold: float,
) -> tuple[list[float], list[float], float]:
    """Naive single-class PR curve and 101-point average precision.

    ``detections``: (image_id, (x, y, w, h), score); ``ground_truths``:
    (image_id, (x, y, w, h)). Returns (recalls, precisions, ap).
    """
    order = sorted(range(len(detections)), key=lambda i: (-detections[i][2], i))
    matched: set[int] = set()
    outcomes: list[bool] = []
    for i in order:
        image_id, box, _score = detections[i]
        best_j, best_iou = -1, 0.0
        for j, (gt_image, gt_box) in enumerate(ground_truths):
            if gt_image != image_id or j in matched:
                continue
            iou = _iou_xywh(box, gt_box)
            if iou >= iou_threshold and iou > best_iou:
                best_j, best_iou = j, iou
        if best_j >= 0:
            matched.add(best_j)
            outcomes.append(True)
        else:
            outcomes.append(False)

    n_gt = len(ground_truths)
    recalls: list[float] = []
    precisions: list[float] = []
    tp = 0
    for rank, hit in enumerate(outcomes, start=1):
        if hit:
            tp += 1
        recalls.append(tp / n_gt if n_gt else 0.0)
        precisions.append(tp / rank)

    if n_gt == 0 or not outcomes:
        return recalls, precisions, 0.0
    total = 0.0
    for step in range(101):
        r = step / 100.0
        best = 0.0
        for rec, prec in zip(recalls, precisions):
            if rec >= r - 1e-12 and prec > best:
                best = prec
        total += best
    return recalls, precisions, total / 101.0


def bilinear_reference(src: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Pixel-at-a-time bilinear resize with half-pixel centers and clamping."""
    src = np.asarray(src, dtype=np.float64)
    in_h, in_w = src.shape
    out_h, out_w = out_size
    out = np.zeros((out_h, out_w), dtype=np.float64)
    for oy in range(out_h):
        for ox in range(out_w):
            sy = (oy + 0.5) * in_h / out_h - 0.5
            sx = (ox + 0.5) * in_w / out_w - 0.5
            sy = min(max(sy, 0.0), in_h - 1.0)
            sx = min(max(sx, 0.0), in_w - 1.0)
            y0, x0 = int(np.floor(sy)), int(np.floor(sx))
            y1, x1 = min(y0 + 1, in_h - 1), min(x0 + 1, in_w - 1)
            fy, fx = sy - y0, sx - x0
            out[oy, ox] = (
                src[y0, x0] * (1 - fy) * (1 - fx)
                + src[y0, x1] * (1 - fy) * fx
                + src[y1, x0] * fy * (1 - fx)
                + src[y1, x1] * fy * fx
            )
    return out
