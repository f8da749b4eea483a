"""Bit-exact float32 tensor files plus the dataset manifest.

Tensor container: the NPY v1.0 on-disk layout (magic ``\\x93NUMPY``, version
1.0, little-endian uint16 header length, ASCII header dictionary), restricted
to ``descr == '<f4'`` and ``fortran_order == False``. The reader validates the
header against the actual file size before touching the payload; it never
trusts a declared length.

Manifest: a single ``manifest.json`` cataloguing categories, images and text
embedding files. All paths inside the manifest are relative to the manifest's
own directory so a dataset can be moved as one tree. Unknown keys survive a
load/save round trip.
"""

from __future__ import annotations

import ast
import json
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DanglingReference,
    DtypeUnsupported,
    IoFailure,
    MalformedHeader,
    SchemaViolation,
    TruncatedPayload,
)

MAGIC = b"\x93NUMPY"
_DESCR = "<f4"
_LABELS = ("normal", "defect", "unknown")


def read_tensor(path: str | Path) -> np.ndarray:
    """Read one float32 tensor file, returning a C-ordered ndarray.

    Raises MalformedHeader, DtypeUnsupported or TruncatedPayload when the
    file is not a valid little-endian float32 container.
    """
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc

    if len(raw) < 10 or raw[:6] != MAGIC:
        raise MalformedHeader(f"{path}: missing tensor-file magic")
    major, minor = raw[6], raw[7]
    if (major, minor) != (1, 0):
        raise MalformedHeader(f"{path}: unsupported container version {major}.{minor}")
    (header_len,) = struct.unpack("<H", raw[8:10])
    if len(raw) < 10 + header_len:
        raise MalformedHeader(f"{path}: header extends past end of file")
    try:
        header_text = raw[10 : 10 + header_len].decode("ascii")
        header = ast.literal_eval(header_text)
    except (UnicodeDecodeError, ValueError, SyntaxError) as exc:
        raise MalformedHeader(f"{path}: unparseable header dictionary") from exc
    if not isinstance(header, dict) or set(header) != {"descr", "fortran_order", "shape"}:
        raise MalformedHeader(f"{path}: header keys {sorted(header) if isinstance(header, dict) else header!r}")

    if header["descr"] != _DESCR:
        raise DtypeUnsupported(f"{path}: descr {header['descr']!r}, only '<f4' is supported")
    if header["fortran_order"] is not False:
        raise DtypeUnsupported(f"{path}: Fortran-ordered payloads are not supported")
    shape = header["shape"]
    if not isinstance(shape, tuple) or not all(isinstance(d, int) and d >= 0 for d in shape):
        raise MalformedHeader(f"{path}: bad shape {shape!r}")

    count = 1
    for d in shape:
        count *= d
    expected = 4 * count
    payload = raw[10 + header_len :]
    if len(payload) != expected:
        raise TruncatedPayload(
            f"{path}: payload is {len(payload)} bytes, header declares {expected}"
        )
    data = np.frombuffer(payload, dtype=np.dtype(_DESCR), count=count)
    return data.reshape(shape).copy()


def write_tensor(path: str | Path, values: np.ndarray) -> None:
    """Write ``values`` as a float32 tensor file readable by read_tensor.

    Input is cast to little-endian float32, row-major; the stored payload is
    what the round trip guarantees bit-for-bit.
    """
    # astype keeps 0-d shapes intact where ascontiguousarray would promote them
    arr = np.asarray(values).astype(np.dtype(_DESCR), order="C", copy=False)
    header = "{'descr': '%s', 'fortran_order': False, 'shape': %s, }" % (
        _DESCR,
        repr(arr.shape),
    )
    # pad so magic + version + length field + header is a multiple of 64
    pad = 64 - (10 + len(header) + 1) % 64
    if pad == 64:
        pad = 0
    header = header + " " * pad + "\n"
    try:
        with open(path, "wb") as fh:
            fh.write(MAGIC)
            fh.write(bytes((1, 0)))
            fh.write(struct.pack("<H", len(header)))
            fh.write(header.encode("ascii"))
            fh.write(arr.tobytes(order="C"))
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


@dataclass
class Category:
    id: int
    name: str
    object: str
    extra: dict = field(default_factory=dict)


@dataclass
class TextEmbeddingPaths:
    normal: str
    anomaly: str
    extra: dict = field(default_factory=dict)


@dataclass
class ImageRecord:
    image_id: int
    category_id: int
    width: int
    height: int
    patch_tokens: str | None = None
    cls_token: str | None = None
    anomaly_map: str | None = None
    gt_boxes: list[list[float]] | None = None
    gt_mask: str | None = None
    label: str = "unknown"
    as_x: float | None = None
    file_name: str | None = None
    extra: dict = field(default_factory=dict)


@dataclass
class DatasetManifest:
    version: str = "1"
    categories: list[Category] = field(default_factory=list)
    text_embeddings: dict[int, TextEmbeddingPaths] = field(default_factory=dict)
    images: list[ImageRecord] = field(default_factory=list)
    extra: dict = field(default_factory=dict)
    root: Path = field(default_factory=Path)

    def resolve(self, relpath: str) -> Path:
        return self.root / relpath

    def category_ids(self) -> set[int]:
        return {c.id for c in self.categories}


_IMAGE_KEYS = {
    "image_id",
    "category_id",
    "width",
    "height",
    "patch_tokens",
    "cls_token",
    "anomaly_map",
    "gt_boxes",
    "gt_mask",
    "label",
    "as_x",
    "file_name",
}


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise SchemaViolation(message)


def _check_relative(value: str, where: str) -> str:
    _require(isinstance(value, str) and value != "", f"{where}: path must be a non-empty string")
    _require(not Path(value).is_absolute(), f"{where}: path {value!r} must be relative")
    return value


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load and eagerly validate a manifest.json.

    Referential integrity (image -> category, text embedding -> category) is
    checked here; a violation raises DanglingReference naming the culprit.
    """
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise SchemaViolation(f"{path}: not valid JSON ({exc})") from exc

    _require(isinstance(doc, dict), "manifest: top level must be an object")
    _require(isinstance(doc.get("version"), str), "manifest.version: required string")
    _require(isinstance(doc.get("categories"), list), "manifest.categories: required list")
    _require(isinstance(doc.get("images"), list), "manifest.images: required list")
    text_doc = doc.get("text_embeddings", {})
    _require(isinstance(text_doc, dict), "manifest.text_embeddings: must be an object")

    categories: list[Category] = []
    for i, entry in enumerate(doc["categories"]):
        where = f"manifest.categories[{i}]"
        _require(isinstance(entry, dict), f"{where}: must be an object")
        _require(isinstance(entry.get("id"), int) and entry["id"] >= 1, f"{where}.id: integer >= 1")
        _require(isinstance(entry.get("name"), str), f"{where}.name: required string")
        _require(isinstance(entry.get("object"), str), f"{where}.object: required string")
        extra = {k: v for k, v in entry.items() if k not in ("id", "name", "object")}
        categories.append(Category(entry["id"], entry["name"], entry["object"], extra))
    ids = [c.id for c in categories]
    _require(len(set(ids)) == len(ids), "manifest.categories: duplicate category id")
    known = set(ids)

    text_embeddings: dict[int, TextEmbeddingPaths] = {}
    for key, entry in text_doc.items():
        where = f"manifest.text_embeddings[{key!r}]"
        try:
            cid = int(key)
        except ValueError:
            raise SchemaViolation(f"{where}: key must be a category id") from None
        if cid not in known:
            raise DanglingReference(f"{where}: category {cid} is not declared")
        _require(isinstance(entry, dict), f"{where}: must be an object")
        normal = _check_relative(entry.get("normal"), f"{where}.normal")
        anomaly = _check_relative(entry.get("anomaly"), f"{where}.anomaly")
        extra = {k: v for k, v in entry.items() if k not in ("normal", "anomaly")}
        text_embeddings[cid] = TextEmbeddingPaths(normal, anomaly, extra)

    images: list[ImageRecord] = []
    seen_ids: set[int] = set()
    for i, entry in enumerate(doc["images"]):
        where = f"manifest.images[{i}]"
        _require(isinstance(entry, dict), f"{where}: must be an object")
        _require(isinstance(entry.get("image_id"), int), f"{where}.image_id: required integer")
        _require(isinstance(entry.get("category_id"), int), f"{where}.category_id: required integer")
        for dim in ("width", "height"):
            _require(
                isinstance(entry.get(dim), int) and entry[dim] >= 1,
                f"{where}.{dim}: integer >= 1",
            )
        image_id = entry["image_id"]
        _require(image_id not in seen_ids, f"{where}.image_id: duplicate id {image_id}")
        seen_ids.add(image_id)
        if entry["category_id"] not in known:
            raise DanglingReference(
                f"{where}: category {entry['category_id']} is not declared"
            )
        rec = ImageRecord(
            image_id=image_id,
            category_id=entry["category_id"],
            width=entry["width"],
            height=entry["height"],
        )
        for key in ("patch_tokens", "cls_token", "anomaly_map", "gt_mask"):
            if entry.get(key) is not None:
                setattr(rec, key, _check_relative(entry[key], f"{where}.{key}"))
        if entry.get("gt_boxes") is not None:
            boxes = entry["gt_boxes"]
            _require(isinstance(boxes, list), f"{where}.gt_boxes: must be a list")
            for j, box in enumerate(boxes):
                _require(
                    isinstance(box, list)
                    and len(box) == 5
                    and all(isinstance(v, (int, float)) for v in box),
                    f"{where}.gt_boxes[{j}]: expected [x, y, w, h, class_id]",
                )
            rec.gt_boxes = [list(map(float, b[:4])) + [int(b[4])] for b in boxes]
        label = entry.get("label", "unknown")
        _require(label in _LABELS, f"{where}.label: {label!r} not in {_LABELS}")
        rec.label = label
        if entry.get("as_x") is not None:
            _require(isinstance(entry["as_x"], (int, float)), f"{where}.as_x: must be a number")
            rec.as_x = float(entry["as_x"])
        if entry.get("file_name") is not None:
            _require(isinstance(entry["file_name"], str), f"{where}.file_name: must be a string")
            rec.file_name = entry["file_name"]
        rec.extra = {k: v for k, v in entry.items() if k not in _IMAGE_KEYS}
        images.append(rec)

    extra = {
        k: v
        for k, v in doc.items()
        if k not in ("version", "categories", "text_embeddings", "images")
    }
    return DatasetManifest(
        version=doc["version"],
        categories=categories,
        text_embeddings=text_embeddings,
        images=images,
        extra=extra,
        root=path.parent,
    )


def manifest_to_dict(manifest: DatasetManifest) -> dict:
    doc: dict = {"version": manifest.version}
    doc["categories"] = [
        {"id": c.id, "name": c.name, "object": c.object, **c.extra} for c in manifest.categories
    ]
    doc["text_embeddings"] = {
        str(cid): {"normal": t.normal, "anomaly": t.anomaly, **t.extra}
        for cid, t in sorted(manifest.text_embeddings.items())
    }
    images = []
    for rec in manifest.images:
        entry: dict = {
            "image_id": rec.image_id,
            "category_id": rec.category_id,
            "width": rec.width,
            "height": rec.height,
        }
        for key in ("patch_tokens", "cls_token", "anomaly_map", "gt_boxes", "gt_mask"):
            value = getattr(rec, key)
            if value is not None:
                entry[key] = value
        entry["label"] = rec.label
        if rec.as_x is not None:
            entry["as_x"] = rec.as_x
        if rec.file_name is not None:
            entry["file_name"] = rec.file_name
        entry.update(rec.extra)
        images.append(entry)
    doc["images"] = images
    doc.update(manifest.extra)
    return doc


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Serialize a manifest; load_manifest(save_manifest(m)) == m up to key order."""
    path = Path(path)
    try:
        path.write_text(
            json.dumps(manifest_to_dict(manifest), indent=2) + "\n", encoding="utf-8"
        )
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc
