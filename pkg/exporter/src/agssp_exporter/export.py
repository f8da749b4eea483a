"""Dataset assembly: encode images and prompt sets, write the wire formats.

Tensor files are plain NPY v1.0 float32 (numpy's default for these shapes);
the manifest is the consumer's documented JSON schema with the prompt
strings recorded verbatim next to their embedding files. All writes go
through a temp-file-then-rename step so a crash never leaves a half-written
artifact.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoders import ExportConfig, load_image, make_encoder


@dataclass
class CategoryPrompts:
    category_id: int
    name: str
    object: str
    normal: list[str]
    anomaly: list[str]

    def __post_init__(self) -> None:
        if not self.normal or not self.anomaly:
            raise ValueError(
                f"category {self.category_id}: normal and anomaly prompt lists "
                "must both be non-empty"
            )


def load_prompts(path) -> list[CategoryPrompts]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    categories = []
    for entry in doc["categories"]:
        categories.append(
            CategoryPrompts(
                category_id=int(entry["id"]),
                name=entry["name"],
                object=entry["object"],
                normal=list(entry["normal_prompts"]),
                anomaly=list(entry["anomaly_prompts"]),
            )
        )
    if not categories:
        raise ValueError("prompts file declares no categories")
    return categories


def _atomic_save(path: Path, array: np.ndarray) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        np.save(fh, array)
    os.replace(tmp, path)


def _atomic_write_text(path: Path, text: str) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def export_text(encoder, category: CategoryPrompts, out_dir: Path) -> dict:
    """Encode one category's prompt sets; returns the manifest entry.

    The prompt strings are recorded verbatim beside the embedding paths so a
    consumer can audit exactly what produced each row.
    """
    normal = encoder.encode_text(category.normal)
    anomaly = encoder.encode_text(category.anomaly)
    normal_rel = f"emb/text_{category.category_id}_normal.npy"
    anomaly_rel = f"emb/text_{category.category_id}_anomaly.npy"
    _atomic_save(out_dir / normal_rel, normal.astype(np.float32))
    _atomic_save(out_dir / anomaly_rel, anomaly.astype(np.float32))
    return {
        "normal": normal_rel,
        "anomaly": anomaly_rel,
        "normal_prompts": category.normal,
        "anomaly_prompts": category.anomaly,
    }


def export_image(encoder, image_path: Path, image_id: int, category_id: int, out_dir: Path) -> dict:
    """Encode one image to patch/global token files; returns the manifest entry."""
    rgb = load_image(image_path)
    tokens, cls = encoder.encode_image(rgb)
    patches_rel = f"emb/{image_id:06d}_patches.npy"
    cls_rel = f"emb/{image_id:06d}_cls.npy"
    _atomic_save(out_dir / patches_rel, tokens)
    _atomic_save(out_dir / cls_rel, cls)
    grid = int(round(np.sqrt(tokens.shape[1])))
    return {
        "image_id": image_id,
        "category_id": category_id,
        "width": int(rgb.shape[1]),
        "height": int(rgb.shape[0]),
        "patch_tokens": patches_rel,
        "cls_token": cls_rel,
        "label": "unknown",
        "file_name": image_path.name,
        "grid": [grid, grid],
    }


IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


def export_dataset(
    images_dir: str | Path,
    prompts_path: str | Path,
    out_dir: str | Path,
    config: ExportConfig,
    category_id: int | None = None,
    reference_names: list[str] | None = None,
) -> Path:
    """Export a directory of images plus prompt embeddings; returns the
    manifest path. Images are assigned ids 1..n in sorted-name order."""
    images_dir = Path(images_dir)
    out_dir = Path(out_dir)
    (out_dir / "emb").mkdir(parents=True, exist_ok=True)
    categories = load_prompts(prompts_path)
    if category_id is None:
        if len(categories) != 1:
            raise ValueError("multiple categories declared; pass an explicit category id")
        category_id = categories[0].category_id
    if category_id not in {c.category_id for c in categories}:
        raise ValueError(f"category {category_id} is not declared in the prompts file")

    encoder = make_encoder(config)
    text_entries = {
        str(c.category_id): export_text(encoder, c, out_dir) for c in categories
    }

    paths = sorted(
        p for p in images_dir.iterdir() if p.suffix.lower() in IMAGE_SUFFIXES
    )
    if not paths:
        raise ValueError(f"no images found under {images_dir}")
    images = []
    reference_ids = []
    for image_id, path in enumerate(paths, start=1):
        images.append(export_image(encoder, path, image_id, category_id, out_dir))
        if reference_names and path.name in reference_names:
            reference_ids.append(image_id)

    spec = config.spec
    manifest = {
        "version": "1",
        "categories": [
            {"id": c.category_id, "name": c.name, "object": c.object} for c in categories
        ],
        "text_embeddings": text_entries,
        "images": images,
        "exporter": {
            "preset": config.preset,
            "backend": config.backend,
            "model": spec.model,
            "input_resolution": spec.resolution,
            "embedding_dim": spec.dim,
            "layer_indices": config.layer_indices,
            "vv_attention": encoder.vv_attention,
        },
    }
    if reference_ids:
        manifest["reference_images"] = reference_ids
    manifest_path = out_dir / "manifest.json"
    _atomic_write_text(manifest_path, json.dumps(manifest, indent=2) + "\n")
    return manifest_path
