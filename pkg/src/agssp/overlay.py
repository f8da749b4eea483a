"""Heat overlays: a fixed jet-style palette alpha-blended onto raster images.

PNG output goes through a small built-in encoder (fixed zlib level, no
ancillary chunks) so identical inputs always produce identical bytes.
"""

from __future__ import annotations

import struct
import zlib
from pathlib import Path

import numpy as np

from .errors import SizeMismatch, UnsupportedImage


def jet_colors(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to RGB floats in [0, 1] (blue -> green -> red)."""
    v = np.clip(np.asarray(values, dtype=np.float64), 0.0, 1.0)
    r = np.clip(1.5 - np.abs(4.0 * v - 3.0), 0.0, 1.0)
    g = np.clip(1.5 - np.abs(4.0 * v - 2.0), 0.0, 1.0)
    b = np.clip(1.5 - np.abs(4.0 * v - 1.0), 0.0, 1.0)
    return np.stack([r, g, b], axis=-1)


def blend_overlay(image_rgb: np.ndarray, anomaly_map: np.ndarray) -> np.ndarray:
    """Alpha-blend the palette over an image; the map value is the alpha.

    Value 0 leaves the pixel untouched, value 1 replaces it with the palette
    color. Map values outside [0, 1] are clipped first.
    """
    image_rgb = np.asarray(image_rgb, dtype=np.uint8)
    anomaly_map = np.asarray(anomaly_map, dtype=np.float64)
    if image_rgb.ndim != 3 or image_rgb.shape[2] != 3:
        raise SizeMismatch(f"expected an RGB image, got shape {image_rgb.shape}")
    if anomaly_map.shape != image_rgb.shape[:2]:
        raise SizeMismatch(
            f"map shape {anomaly_map.shape} != image shape {image_rgb.shape[:2]}"
        )
    alpha = np.clip(anomaly_map, 0.0, 1.0)[..., None]
    heat = jet_colors(anomaly_map) * 255.0
    blended = (1.0 - alpha) * image_rgb.astype(np.float64) + alpha * heat
    return np.clip(np.rint(blended), 0, 255).astype(np.uint8)


def _chunk(tag: bytes, payload: bytes) -> bytes:
    return (
        struct.pack(">I", len(payload))
        + tag
        + payload
        + struct.pack(">I", zlib.crc32(tag + payload) & 0xFFFFFFFF)
    )


def write_png(path: str | Path, rgb: np.ndarray) -> None:
    """Write an 8-bit RGB PNG with deterministic bytes."""
    rgb = np.asarray(rgb, dtype=np.uint8)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise SizeMismatch(f"expected (H, W, 3) uint8 data, got shape {rgb.shape}")
    height, width = rgb.shape[:2]
    header = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    raw = b"".join(b"\x00" + row.tobytes() for row in rgb)
    body = (
        b"\x89PNG\r\n\x1a\n"
        + _chunk(b"IHDR", header)
        + _chunk(b"IDAT", zlib.compress(raw, 6))
        + _chunk(b"IEND", b"")
    )
    Path(path).write_bytes(body)


def read_image(path: str | Path) -> np.ndarray:
    """Decode a raster image to (H, W, 3) uint8 via Pillow."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise UnsupportedImage(f"cannot decode {path}: {exc}") from exc
