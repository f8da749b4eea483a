"""Anomaly maps to COCO pseudo-defect boxes.

Per-category dynamic thresholds binarize each map, connected regions become
scored boxes, and the survivors of top-k retention plus non-maximum
suppression are emitted as single-class COCO annotations. Every stage is a
pure function of its inputs so a batch run is reproducible regardless of
worker count.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import scoring, tensorio
from .errors import EmptyCategory, MissingMap, MissingScore
from .metrics import box_iou

logger = logging.getLogger(__name__)

PSEUDO_CLASS_ID = 1
PSEUDO_CLASS_NAME = "anomaly"

_STRUCTURE_8 = np.ones((3, 3), dtype=bool)
_STRUCTURE_4 = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)


@dataclass
class ThresholdConfig:
    delta: float = 0.1
    min_component_area: int = 4
    top_k: int = 10
    nms_iou: float = 0.5
    classify_threshold: float = 0.5
    connectivity: int = 8  # or 4
    box_score: str = "max"  # or "mean"
    nms_before_topk: bool = False

    def __post_init__(self) -> None:
        if not 0.0 <= self.delta < 1.0:
            raise ValueError("delta must lie in [0, 1)")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")
        if not 0.0 < self.nms_iou <= 1.0:
            raise ValueError("nms_iou must lie in (0, 1]")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.box_score not in ("max", "mean"):
            raise ValueError("box_score must be 'max' or 'mean'")


@dataclass(frozen=True)
class CategoryThreshold:
    category_id: int
    mu_max: float
    t_k: float


@dataclass(frozen=True)
class Component:
    label_id: int
    area: int
    bbox: tuple[int, int, int, int]  # x, y, w, h
    max_anomaly: float
    mean_anomaly: float
    centroid: tuple[float, float]  # cx, cy


@dataclass(frozen=True)
class PseudoBox:
    bbox: tuple[int, int, int, int]
    score: float
    category_id: int = PSEUDO_CLASS_ID


def classify_image(as_x: float, cfg: ThresholdConfig) -> str:
    """'normal' below the classification threshold, 'defect' otherwise."""
    if not np.isfinite(as_x):
        raise ValueError("image score must be finite")
    return "normal" if as_x < cfg.classify_threshold else "defect"


def category_threshold(maps, delta: float, category_id: int = 0) -> CategoryThreshold:
    """Mean of per-map maxima minus delta for one category's anomaly maps."""
    maxima = []
    for m in maps:
        arr = np.asarray(m)
        if arr.size == 0:
            raise EmptyCategory("category contains an empty map")
        maxima.append(float(arr.max()))
    if not maxima:
        raise EmptyCategory("category has no anomaly maps")
    mu_max = float(np.mean(maxima))
    t_k = mu_max - delta
    if t_k <= 0.0:
        logger.warning(
            "category %d: threshold %.4f <= 0, binary masks will cover whole maps",
            category_id,
            t_k,
        )
    return CategoryThreshold(category_id=category_id, mu_max=mu_max, t_k=t_k)


def binarize(anomaly_map: np.ndarray, threshold: float) -> np.ndarray:
    """Boolean mask of pixels at or above the threshold (inclusive)."""
    return np.asarray(anomaly_map) >= threshold


def connected_components(
    mask: np.ndarray,
    anomaly_map: np.ndarray,
    connectivity: int = 8,
) -> list[Component]:
    """Label the mask and collect per-component stats.

    Components come back ordered by the raster position of their first pixel;
    bboxes are the tight axis-aligned rectangles, centroids are (cx, cy).
    """
    mask = np.asarray(mask, dtype=bool)
    anomaly_map = np.asarray(anomaly_map, dtype=np.float64)
    if mask.shape != anomaly_map.shape:
        raise ValueError(f"mask {mask.shape} and map {anomaly_map.shape} shapes differ")
    structure = _STRUCTURE_8 if connectivity == 8 else _STRUCTURE_4
    labels, count = ndimage.label(mask, structure=structure)
    if count == 0:
        return []

    flat = labels.ravel()
    values, first_index = np.unique(flat, return_index=True)
    order = [int(v) for _, v in sorted(zip(first_index, values)) if v != 0]

    slices = ndimage.find_objects(labels)
    areas = np.bincount(flat)
    maxima = ndimage.maximum(anomaly_map, labels, index=order)
    means = ndimage.mean(anomaly_map, labels, index=order)
    centroids = ndimage.center_of_mass(mask, labels, index=order)

    components = []
    for new_id, old in enumerate(order, start=1):
        sl_y, sl_x = slices[old - 1]
        components.append(
            Component(
                label_id=new_id,
                area=int(areas[old]),
                bbox=(
                    int(sl_x.start),
                    int(sl_y.start),
                    int(sl_x.stop - sl_x.start),
                    int(sl_y.stop - sl_y.start),
                ),
                max_anomaly=float(maxima[new_id - 1]),
                mean_anomaly=float(means[new_id - 1]),
                centroid=(float(centroids[new_id - 1][1]), float(centroids[new_id - 1][0])),
            )
        )
    return components


def _box_sort_key(box: PseudoBox):
    x, y, w, h = box.bbox
    return (-box.score, -(w * h), y, x, w, h)


def nms(boxes: list[PseudoBox], iou_threshold: float) -> list[PseudoBox]:
    """Greedy suppression: keep the best box, drop overlaps strictly above
    the threshold, repeat. Output stays score-descending."""
    if not 0.0 < iou_threshold <= 1.0:
        raise ValueError("iou_threshold must lie in (0, 1]")
    pending = sorted(boxes, key=_box_sort_key)
    kept: list[PseudoBox] = []
    while pending:
        best = pending.pop(0)
        kept.append(best)
        pending = [b for b in pending if not box_iou(best.bbox, b.bbox) > iou_threshold]
    return kept


def components_to_boxes(components: list[Component], cfg: ThresholdConfig) -> list[PseudoBox]:
    """Components to pruned pseudo boxes: area filter, rank, keep top-k, NMS."""
    boxes = [
        PseudoBox(
            bbox=c.bbox,
            score=c.max_anomaly if cfg.box_score == "max" else c.mean_anomaly,
        )
        for c in components
        if c.area >= cfg.min_component_area
    ]
    boxes.sort(key=_box_sort_key)
    if cfg.nms_before_topk:
        return nms(boxes, cfg.nms_iou)[: cfg.top_k]
    return nms(boxes[: cfg.top_k], cfg.nms_iou)


def _run_ordered(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _image_score_from_tokens(manifest, record, scoring_cfg):
    paths = manifest.text_embeddings.get(record.category_id)
    if record.cls_token is None or paths is None:
        raise MissingScore(
            f"image {record.image_id}: no stored score and no tokens/text to recompute"
        )
    cls = tensorio.read_tensor(manifest.resolve(record.cls_token))
    t_pos = scoring.average_text_tokens(tensorio.read_tensor(manifest.resolve(paths.normal)))
    t_neg = scoring.average_text_tokens(tensorio.read_tensor(manifest.resolve(paths.anomaly)))
    return scoring.anomaly_score(cls, t_pos, t_neg, scoring_cfg.tau)


def _square_grid(m: int) -> tuple[int, int]:
    side = int(round(np.sqrt(m)))
    if side * side != m:
        raise ValueError(f"{m} patches do not form a square grid; specify one")
    return side, side


def _zero_shot_from_tokens(manifest, record, scoring_cfg):
    paths = manifest.text_embeddings.get(record.category_id)
    if record.patch_tokens is None or record.cls_token is None or paths is None:
        return None
    layers = tensorio.read_tensor(manifest.resolve(record.patch_tokens))
    tokens = scoring.PatchTokenSet(
        layers=layers,
        cls=tensorio.read_tensor(manifest.resolve(record.cls_token)),
        grid=_square_grid(layers.shape[1]),
    )
    text = scoring.TextEmbeddingSet(
        normal=tensorio.read_tensor(manifest.resolve(paths.normal)),
        anomaly=tensorio.read_tensor(manifest.resolve(paths.anomaly)),
        category_id=record.category_id,
    )
    return scoring.zero_shot_map(tokens, text, scoring_cfg, (record.height, record.width))


def generate_pseudo_labels(
    manifest: tensorio.DatasetManifest,
    cfg: ThresholdConfig,
    scoring_cfg: scoring.ScoringConfig | None = None,
    workers: int = 1,
) -> dict:
    """Run the whole box pipeline over a manifest; returns a COCO document.

    Normal-classified images contribute no annotations. Image scores and maps
    missing from the manifest are recomputed from tokens and text embeddings
    when present; otherwise MissingScore / MissingMap is raised.
    """
    scoring_cfg = scoring_cfg or scoring.ScoringConfig()

    def image_score_of(record):
        if record.as_x is not None:
            return record.as_x
        return _image_score_from_tokens(manifest, record, scoring_cfg)

    def map_of(record):
        if record.anomaly_map is not None:
            return tensorio.read_tensor(manifest.resolve(record.anomaly_map))
        return _zero_shot_from_tokens(manifest, record, scoring_cfg)

    records = list(manifest.images)
    scores = _run_ordered(image_score_of, records, workers)
    maps = _run_ordered(map_of, records, workers)

    labels = [classify_image(s, cfg) for s in scores]
    for record, label, anomaly_map in zip(records, labels, maps):
        if label == "defect" and anomaly_map is None:
            raise MissingMap(f"image {record.image_id} is classified defect but has no map")

    thresholds: dict[int, CategoryThreshold] = {}
    for category in manifest.categories:
        cat_maps = [
            m
            for record, m in zip(records, maps)
            if record.category_id == category.id and m is not None
        ]
        if cat_maps:
            thresholds[category.id] = category_threshold(cat_maps, cfg.delta, category.id)

    def boxes_of(item):
        record, label, anomaly_map = item
        if label != "defect":
            return []
        t_k = thresholds[record.category_id].t_k
        mask = binarize(anomaly_map, t_k)
        comps = connected_components(mask, anomaly_map, cfg.connectivity)
        return components_to_boxes(comps, cfg)

    per_image = _run_ordered(boxes_of, list(zip(records, labels, maps)), workers)

    ordered = sorted(zip(records, per_image), key=lambda pair: pair[0].image_id)
    images_doc = [
        {
            "id": record.image_id,
            "width": record.width,
            "height": record.height,
            "file_name": record.file_name or f"{record.image_id}.png",
        }
        for record, _ in ordered
    ]
    annotations = []
    next_id = 1
    for record, boxes in ordered:
        for box in boxes:
            x, y, w, h = box.bbox
            annotations.append(
                {
                    "id": next_id,
                    "image_id": record.image_id,
                    "category_id": box.category_id,
                    "bbox": [x, y, w, h],
                    "area": w * h,
                    "score": box.score,
                    "iscrowd": 0,
                }
            )
            next_id += 1
    return {
        "images": images_doc,
        "annotations": annotations,
        "categories": [{"id": PSEUDO_CLASS_ID, "name": PSEUDO_CLASS_NAME}],
    }
