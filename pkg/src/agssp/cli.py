"""Command-line surface: synth, score, boxes, distill-targets, eval,
sweep-delta and overlay.

Progress goes to stderr; machine-readable results go to files or stdout.
Exit codes: 0 success, 2 invalid input or flags, 1 internal error.

Configuration precedence is flags > config file > built-in defaults. The
config file is a flat list of ``key = value`` lines (strings quoted, ``#``
comments); recognized keys mirror the long flag names with underscores,
e.g. ``tau = 0.07`` or ``top_k = 10``. ``AGSSP_THREADS`` caps the worker
count of any run.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import distill, metrics, overlay, pseudolabel, scoring, synth, tensorio
from .errors import (
    AgsspError,
    MissingEmbeddings,
    MissingGtMasks,
    SizeMismatch,
    ValidationError,
)

logger = logging.getLogger("agssp")

DEFAULTS = {
    "tau": 0.07,
    "delta": 0.1,
    "min_component_area": 4,
    "top_k": 10,
    "nms_iou": 0.5,
    "classify_threshold": 0.5,
    "connectivity": 8,
    "box_score": "max",
    "few_shot_layer": "all",
    "threads": 4,
    "stride": 1,
    "task_loss": 1.0,
}


def load_config(path: str | Path) -> dict:
    """Parse the flat key = value config format."""
    values: dict = {}
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ValidationError(f"cannot read config {path}: {exc}") from exc
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value'")
        values[key.strip()] = _parse_config_value(value.strip(), path, lineno)
    return values


def _parse_config_value(text: str, path, lineno: int):
    if len(text) >= 2 and text[0] == '"' and text[-1] == '"':
        return text[1:-1]
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    raise ValidationError(f"{path}:{lineno}: cannot parse value {text!r}")


class Settings:
    """Flag > config > default resolution for one command invocation."""

    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.config = load_config(args.config) if getattr(args, "config", None) else {}

    def get(self, name: str):
        value = getattr(self.args, name, None)
        if value is not None:
            return value
        if name in self.config:
            return self.config[name]
        return DEFAULTS.get(name)

    def threads(self) -> int:
        requested = int(self.get("threads"))
        cap = os.environ.get("AGSSP_THREADS")
        if cap is not None:
            try:
                requested = min(requested, int(cap))
            except ValueError:
                raise ValidationError(f"AGSSP_THREADS={cap!r} is not an integer") from None
        return max(1, requested)


def _run_ordered(fn, items, workers: int):
    if workers <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _parse_size(text: str) -> tuple[int, int]:
    try:
        h, w = text.lower().split("x")
        return int(h), int(w)
    except ValueError:
        raise ValidationError(f"expected HxW, got {text!r}") from None


def _write_json(path: str | Path, doc) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def _emit_result(doc, out: str | None) -> None:
    if out:
        _write_json(out, doc)
    else:
        print(json.dumps(doc, indent=2))


def _threshold_config(settings: Settings) -> pseudolabel.ThresholdConfig:
    return pseudolabel.ThresholdConfig(
        delta=float(settings.get("delta")),
        min_component_area=int(settings.get("min_component_area")),
        top_k=int(settings.get("top_k")),
        nms_iou=float(settings.get("nms_iou")),
        classify_threshold=float(settings.get("classify_threshold")),
        connectivity=int(settings.get("connectivity")),
        box_score=str(settings.get("box_score")),
        nms_before_topk=bool(getattr(settings.args, "nms_first", False)),
    )


# --- synth ---


def cmd_synth(args: argparse.Namespace) -> int:
    spec = synth.SynthSpec(
        seed=args.seed,
        num_images=args.n,
        height=_parse_size(args.size)[0],
        width=_parse_size(args.size)[1],
        geometry=args.geometry,
        defect_free_fraction=args.defect_free_fraction,
        num_categories=args.categories,
    )
    manifest = synth.generate(spec, args.out)
    logger.info("wrote %d images under %s", len(manifest.images), args.out)
    return 0


# --- score ---


def _load_text_set(manifest, category_id):
    paths = manifest.text_embeddings.get(category_id)
    if paths is None:
        return None
    return scoring.TextEmbeddingSet(
        normal=tensorio.read_tensor(manifest.resolve(paths.normal)),
        anomaly=tensorio.read_tensor(manifest.resolve(paths.anomaly)),
        category_id=category_id,
    )


def _load_tokens(manifest, record):
    if record.patch_tokens is None or record.cls_token is None:
        return None
    layers = tensorio.read_tensor(manifest.resolve(record.patch_tokens))
    grid = record.extra.get("grid")
    if grid is None:
        side = int(round(np.sqrt(layers.shape[1])))
        if side * side != layers.shape[1]:
            raise ValidationError(
                f"image {record.image_id}: {layers.shape[1]} patches are not square; "
                "add a 'grid' entry to the manifest"
            )
        grid = (side, side)
    return scoring.PatchTokenSet(
        layers=layers,
        cls=tensorio.read_tensor(manifest.resolve(record.cls_token)),
        grid=(int(grid[0]), int(grid[1])),
    )


def _build_bank(manifest, ref_ids, few_shot_layer):
    per_image = []
    for ref_id in ref_ids:
        record = next((r for r in manifest.images if r.image_id == ref_id), None)
        if record is None:
            raise ValidationError(f"reference image {ref_id} is not in the manifest")
        tokens = _load_tokens(manifest, record)
        if tokens is None:
            raise MissingEmbeddings(f"reference image {ref_id} has no patch tokens")
        per_image.append(tokens.layers)
    if not per_image:
        return None
    stacked = [np.concatenate([layers[i] for layers in per_image]) for i in range(4)]
    if few_shot_layer == "final":
        return scoring.MemoryBank(per_layer=[stacked[3]], k=len(ref_ids))
    return scoring.MemoryBank(per_layer=stacked, k=len(ref_ids))


def cmd_score(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = tensorio.load_manifest(args.manifest)
    out_dir = Path(args.out)
    (out_dir / "maps").mkdir(parents=True, exist_ok=True)
    tau = float(settings.get("tau"))
    cfg = scoring.ScoringConfig(tau=tau, mode="few-shot" if args.refs else "zero-shot")

    ref_ids = [int(v) for v in args.refs.split(",")] if args.refs else []
    bank = _build_bank(manifest, ref_ids, settings.get("few_shot_layer"))

    def score_one(record):
        tokens = _load_tokens(manifest, record)
        text = _load_text_set(manifest, record.category_id)
        if tokens is not None and text is not None:
            out_size = (record.height, record.width)
            zero = scoring.zero_shot_map(tokens, text, cfg, out_size)
            as_x = scoring.image_score(tokens, text, cfg)
            anomaly_map = zero
            if bank is not None:
                anomaly_map = scoring.combined_map(
                    zero, scoring.few_shot_map(tokens, bank, out_size)
                )
        elif record.anomaly_map is not None and record.as_x is not None:
            anomaly_map = tensorio.read_tensor(manifest.resolve(record.anomaly_map))
            as_x = record.as_x
        else:
            raise MissingEmbeddings(
                f"image {record.image_id}: no text embeddings/tokens and no "
                "precomputed map with a stored score"
            )
        if args.clip_map:
            anomaly_map = np.clip(anomaly_map, 0.0, 1.0)
        return anomaly_map, float(as_x), scoring.final_score(anomaly_map, as_x)

    results = _run_ordered(score_one, manifest.images, settings.threads())

    entries = []
    out_manifest = tensorio.load_manifest(args.manifest)
    out_manifest.root = out_dir
    input_root = manifest.root
    for record, out_record, (anomaly_map, as_x, final) in zip(
        manifest.images, out_manifest.images, results
    ):
        rel = f"maps/{record.image_id:06d}.npy"
        tensorio.write_tensor(out_dir / rel, anomaly_map)
        entries.append(
            {
                "image_id": record.image_id,
                "as_x": as_x,
                "as": final,
                "anomaly_map": rel,
            }
        )
        out_record.anomaly_map = rel
        out_record.as_x = as_x
        for key in ("patch_tokens", "cls_token", "gt_mask"):
            value = getattr(out_record, key)
            if value is not None:
                setattr(
                    out_record,
                    key,
                    Path(os.path.relpath(input_root / value, out_dir)).as_posix(),
                )
    for paths in out_manifest.text_embeddings.values():
        paths.normal = Path(os.path.relpath(input_root / paths.normal, out_dir)).as_posix()
        paths.anomaly = Path(os.path.relpath(input_root / paths.anomaly, out_dir)).as_posix()

    entries.sort(key=lambda e: e["image_id"])
    _write_json(out_dir / "scores.json", {"tau": tau, "mode": cfg.mode, "images": entries})
    tensorio.save_manifest(out_manifest, out_dir / "manifest.json")
    logger.info("scored %d images into %s", len(entries), out_dir)
    return 0


# --- boxes ---


def cmd_boxes(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = tensorio.load_manifest(args.manifest)
    cfg = _threshold_config(settings)
    doc = pseudolabel.generate_pseudo_labels(
        manifest,
        cfg,
        scoring_cfg=scoring.ScoringConfig(tau=float(settings.get("tau"))),
        workers=settings.threads(),
    )
    _write_json(args.out, doc)
    logger.info(
        "wrote %d annotations for %d images to %s",
        len(doc["annotations"]),
        len(doc["images"]),
        args.out,
    )
    return 0


# --- distill targets ---


def cmd_distill_targets(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = tensorio.load_manifest(args.manifest)
    layer_sizes = [_parse_size(part) for part in args.layer_sizes.split(",")]
    normalization = args.distill_norm or distill.NORM_L2_FLATTEN
    task_loss = float(settings.get("task_loss"))
    out_dir = Path(args.out)
    (out_dir / "targets").mkdir(parents=True, exist_ok=True)

    records = []
    for record in manifest.images:
        if record.anomaly_map is None:
            continue
        anomaly_map = tensorio.read_tensor(manifest.resolve(record.anomaly_map))
        for layer, dims in enumerate(layer_sizes):
            target = distill.resize_target(anomaly_map, dims)
            rel = f"targets/{record.image_id:06d}_l{layer}.npy"
            tensorio.write_tensor(out_dir / rel, target)
            # example losses: a flat attention map against this target
            attention = np.ones(dims, dtype=np.float64)
            try:
                loss_l2, _ = distill.l2_distill_loss(
                    distill.DistillBatch(layers=[(attention, target)], normalization=normalization)
                )
                loss_cos, _ = distill.cosine_distill_loss(
                    distill.DistillBatch(layers=[(attention, target)])
                )
                lambda_example = distill.compute_lambda(loss_l2, task_loss).lambda_
            except AgsspError:
                loss_l2 = loss_cos = lambda_example = None
            records.append(
                {
                    "image_id": record.image_id,
                    "layer": layer,
                    "height": dims[0],
                    "width": dims[1],
                    "target": rel,
                    "loss_l2": loss_l2,
                    "loss_cos": loss_cos,
                    "lambda_example": lambda_example,
                }
            )
    _write_json(out_dir / "targets.json", {"normalization": normalization, "records": records})
    logger.info("wrote %d distillation targets to %s", len(records), out_dir)
    return 0


# --- eval ---


def _manifest_maps_and_masks(manifest):
    pairs = []
    for record in manifest.images:
        if record.anomaly_map is None or record.gt_mask is None:
            continue
        anomaly_map = tensorio.read_tensor(manifest.resolve(record.anomaly_map))
        mask = tensorio.read_tensor(manifest.resolve(record.gt_mask)) > 0.5
        pairs.append((record, anomaly_map, mask))
    return pairs


def _category_thresholds(manifest, delta):
    maps_by_category: dict[int, list] = {}
    for record in manifest.images:
        if record.anomaly_map is None:
            continue
        maps_by_category.setdefault(record.category_id, []).append(
            tensorio.read_tensor(manifest.resolve(record.anomaly_map))
        )
    return {
        cid: pseudolabel.category_threshold(maps, delta, cid).t_k
        for cid, maps in maps_by_category.items()
    }


def _mean_mask_iou(pairs, thresholds_by_category) -> float:
    ious = []
    for record, anomaly_map, mask in pairs:
        t_k = thresholds_by_category[record.category_id]
        pred = pseudolabel.binarize(anomaly_map, t_k)
        ious.append(metrics.mask_iou(pred, mask))
    return float(np.mean(ious))


def cmd_eval_auroc(args: argparse.Namespace) -> int:
    manifest = tensorio.load_manifest(args.manifest)
    scores_doc = json.loads(Path(args.scores).read_text(encoding="utf-8"))
    by_id = {entry["image_id"]: entry for entry in scores_doc["images"]}
    values, labels = [], []
    for record in manifest.images:
        if record.label == "unknown" or record.image_id not in by_id:
            continue
        values.append(float(by_id[record.image_id][args.score_field]))
        labels.append(1 if record.label == "defect" else 0)
    value = metrics.auroc(values, labels)
    _emit_result(
        {
            "metric": "auroc",
            "value": value,
            "score_field": args.score_field,
            "n_images": len(values),
        },
        args.out,
    )
    return 0


def cmd_eval_pixel_auroc(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = tensorio.load_manifest(args.manifest)
    pairs = _manifest_maps_and_masks(manifest)
    if not pairs:
        raise MissingGtMasks("no image carries both an anomaly map and a gt mask")
    value = metrics.pixel_auroc(
        [p[1] for p in pairs],
        [p[2] for p in pairs],
        subsample=int(settings.get("stride")),
    )
    _emit_result({"metric": "pixel-auroc", "value": value, "n_images": len(pairs)}, args.out)
    return 0


def cmd_eval_iou(args: argparse.Namespace) -> int:
    settings = Settings(args)
    manifest = tensorio.load_manifest(args.manifest)
    pairs = _manifest_maps_and_masks(manifest)
    if not pairs:
        raise MissingGtMasks("no image carries both an anomaly map and a gt mask")
    delta = float(settings.get("delta"))
    value = _mean_mask_iou(pairs, _category_thresholds(manifest, delta))
    _emit_result(
        {"metric": "mask-iou", "delta": delta, "value": value, "n_images": len(pairs)},
        args.out,
    )
    return 0


def _detections_from_coco(path) -> list[metrics.Detection]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return [
        metrics.Detection(
            image_id=ann["image_id"],
            bbox=tuple(float(v) for v in ann["bbox"]),
            class_id=ann["category_id"],
            score=float(ann.get("score", 1.0)),
        )
        for ann in doc["annotations"]
    ]


def _ground_truths(args) -> list[metrics.GroundTruth]:
    if args.gt:
        doc = json.loads(Path(args.gt).read_text(encoding="utf-8"))
        return [
            metrics.GroundTruth(
                image_id=ann["image_id"],
                bbox=tuple(float(v) for v in ann["bbox"]),
                class_id=ann["category_id"],
            )
            for ann in doc["annotations"]
        ]
    manifest = tensorio.load_manifest(args.manifest)
    gts = []
    for record in manifest.images:
        for x, y, w, h, class_id in record.gt_boxes or []:
            gts.append(
                metrics.GroundTruth(
                    image_id=record.image_id, bbox=(x, y, w, h), class_id=int(class_id)
                )
            )
    return gts


def cmd_eval_map(args: argparse.Namespace) -> int:
    if not args.gt and not args.manifest:
        raise ValidationError("eval map needs --gt or --manifest for ground truth")
    detections = _detections_from_coco(args.pred)
    ground_truths = _ground_truths(args)
    result = metrics.mean_ap(detections, ground_truths)
    _emit_result(
        {
            "metric": "map",
            "map50": result["map50"],
            "map5095": result["map5095"],
            "per_class": {str(k): v for k, v in result["per_class"].items()},
        },
        args.out,
    )
    return 0


# --- sweep delta ---


def cmd_sweep_delta(args: argparse.Namespace) -> int:
    manifest = tensorio.load_manifest(args.manifest)
    deltas = [float(v) for v in args.deltas.split(",")] if args.deltas else []
    pairs = _manifest_maps_and_masks(manifest)
    if deltas and not pairs:
        raise MissingGtMasks("no image carries both an anomaly map and a gt mask")

    maps_by_category: dict[int, list] = {}
    for record, anomaly_map, _mask in pairs:
        maps_by_category.setdefault(record.category_id, []).append(anomaly_map)
    mu_by_category = {
        cid: pseudolabel.category_threshold(maps, 0.0, cid).mu_max
        for cid, maps in maps_by_category.items()
    }

    rows = []
    for delta in deltas:
        thresholds = {cid: mu - delta for cid, mu in mu_by_category.items()}
        rows.append({"delta": delta, "mean_mask_iou": _mean_mask_iou(pairs, thresholds)})

    if args.out_csv:
        lines = ["delta,mean_mask_iou"]
        lines += [f"{row['delta']},{row['mean_mask_iou']}" for row in rows]
        Path(args.out_csv).write_text("\n".join(lines) + "\n", encoding="utf-8")
    _emit_result({"metric": "delta-sweep", "rows": rows}, args.out)
    return 0


# --- overlay ---


def cmd_overlay(args: argparse.Namespace) -> int:
    image = overlay.read_image(args.image)
    anomaly_map = tensorio.read_tensor(args.map)
    if anomaly_map.shape != image.shape[:2]:
        raise SizeMismatch(
            f"map shape {anomaly_map.shape} != image shape {image.shape[:2]}"
        )
    overlay.write_png(args.out, overlay.blend_overlay(image, anomaly_map))
    logger.info("wrote overlay to %s", args.out)
    return 0


# --- parser ---


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="flat key = value config file")
    parser.add_argument("--threads", type=int, help="worker count (capped by AGSSP_THREADS)")
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="agssp",
        description="Anomaly scoring, pseudo-defect boxes and detection metrics "
        "on precomputed embeddings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a deterministic synthetic dataset")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=200, help="number of images")
    p.add_argument("--out", required=True)
    p.add_argument("--size", default="256x256", help="map size HxW")
    p.add_argument("--geometry", choices=["rect", "gaussian-bump"], default="rect")
    p.add_argument("--defect-free-fraction", type=float, default=0.3)
    p.add_argument("--categories", type=int, default=2)
    _add_common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("score", help="compute anomaly maps and image scores")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="output dataset directory")
    p.add_argument("--tau", type=float, help="softmax temperature (default 0.07)")
    p.add_argument("--refs", help="comma-separated reference image ids for few-shot mode")
    p.add_argument(
        "--few-shot-layer",
        choices=["all", "final"],
        dest="few_shot_layer",
        help="bank layout: one bank per layer or a single final-layer bank",
    )
    p.add_argument(
        "--clip-map", action="store_true", help="clip output maps to [0, 1]"
    )
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("boxes", help="emit COCO pseudo-defect boxes from maps")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="COCO annotations output path")
    p.add_argument("--delta", type=float, help="threshold offset (default 0.1)")
    p.add_argument("--top-k", type=int, dest="top_k")
    p.add_argument("--nms-iou", type=float, dest="nms_iou")
    p.add_argument("--min-area", type=int, dest="min_component_area")
    p.add_argument("--classify-threshold", type=float, dest="classify_threshold")
    p.add_argument("--connectivity", type=int, choices=[4, 8])
    p.add_argument("--box-score", choices=["max", "mean"], dest="box_score")
    p.add_argument(
        "--nms-first",
        action="store_true",
        help="apply NMS before top-k retention (ablation order swap)",
    )
    p.add_argument("--tau", type=float, help="temperature for recomputed scores")
    _add_common(p)
    p.set_defaults(func=cmd_boxes)

    p = sub.add_parser("distill-targets", help="resize maps into per-layer targets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True)
    p.add_argument(
        "--layer-sizes",
        required=True,
        dest="layer_sizes",
        help="comma-separated HxW per distilled layer, e.g. 32x32,16x16",
    )
    p.add_argument(
        "--distill-norm",
        choices=[distill.NORM_L2_FLATTEN, distill.NORM_NONE],
        dest="distill_norm",
    )
    p.add_argument("--task-loss", type=float, dest="task_loss")
    _add_common(p)
    p.set_defaults(func=cmd_distill_targets)

    p = sub.add_parser("eval", help="evaluation metrics")
    eval_sub = p.add_subparsers(dest="eval_command", required=True)

    q = eval_sub.add_parser("auroc", help="image-level AUROC from a scores file")
    q.add_argument("--manifest", required=True)
    q.add_argument("--scores", required=True)
    q.add_argument("--score-field", choices=["as", "as_x"], default="as", dest="score_field")
    q.add_argument("--out")
    _add_common(q)
    q.set_defaults(func=cmd_eval_auroc)

    q = eval_sub.add_parser("pixel-auroc", help="pixel-level AUROC vs gt masks")
    q.add_argument("--manifest", required=True)
    q.add_argument("--stride", type=int, help="pixel subsampling stride")
    q.add_argument("--out")
    _add_common(q)
    q.set_defaults(func=cmd_eval_pixel_auroc)

    q = eval_sub.add_parser("iou", help="mean mask IoU at one delta")
    q.add_argument("--manifest", required=True)
    q.add_argument("--delta", type=float)
    q.add_argument("--out")
    _add_common(q)
    q.set_defaults(func=cmd_eval_iou)

    q = eval_sub.add_parser("map", help="mAP@0.5 and mAP@0.5:0.95")
    q.add_argument("--pred", required=True, help="COCO detections file")
    q.add_argument("--manifest", help="ground truth from manifest gt_boxes")
    q.add_argument("--gt", help="ground truth COCO file")
    q.add_argument("--out")
    _add_common(q)
    q.set_defaults(func=cmd_eval_map)

    p = sub.add_parser("sweep-delta", help="mask IoU across threshold offsets")
    p.add_argument("--manifest", required=True)
    p.add_argument("--deltas", required=True, help="comma-separated offsets, e.g. 0.0,0.1,0.2")
    p.add_argument("--out", help="JSON output path (default stdout)")
    p.add_argument("--out-csv", dest="out_csv", help="plot-ready CSV output path")
    _add_common(p)
    p.set_defaults(func=cmd_sweep_delta)

    p = sub.add_parser("overlay", help="blend a map over a raster image")
    p.add_argument("--image", required=True)
    p.add_argument("--map", required=True)
    p.add_argument("--out", required=True)
    _add_common(p)
    p.set_defaults(func=cmd_overlay)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AgsspError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:  # internal failure contract: exit code 1
        logging.getLogger("agssp").exception("internal error")
        return 1


def entrypoint() -> None:
    sys.exit(main())
