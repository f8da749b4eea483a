"""Deterministic synthetic fixtures: anomaly maps with planted defects.

Randomness comes from xoshiro256** seeded through splitmix64, both fixed
64-bit algorithms, so a given spec regenerates byte-identical datasets
anywhere. Stream layout: image ``i`` (0-based) draws its geometry from the
scalar stream ``derive(seed, 2*i)`` and its pixel noise from vectorized
per-pixel lanes rooted at ``derive(seed, 2*i + 1)``, where ``derive`` is a
single splitmix64 mix of ``seed + (k + 1) * GOLDEN``.

Planted defects are rectangles (default) or gaussian bumps on a noisy,
speckled background. Ground truth is exact: rectangle boxes, or the
full-width-half-maximum box of each noiseless bump. Image-level scores are a
perfect-classifier stand-in (1.0 for defect images, 0.0 otherwise).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import tensorio
from .errors import IoFailure

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB

_CATEGORY_NAMES = [
    ("panel-a", "brushed panel"),
    ("panel-b", "rolled sheet"),
    ("panel-c", "cast slab"),
    ("panel-d", "drawn tube"),
]


def _splitmix_mix_scalar(x: int) -> int:
    z = x & MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def splitmix64(state: int) -> tuple[int, int]:
    """One splitmix64 step: returns (new_state, output)."""
    state = (state + GOLDEN) & MASK64
    return state, _splitmix_mix_scalar(state)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & MASK64


class Xoshiro256StarStar:
    """Scalar xoshiro256**; state seeded from the splitmix64 stream."""

    def __init__(self, seed: int):
        state = seed & MASK64
        words = []
        for _ in range(4):
            state, word = splitmix64(state)
            words.append(word)
        self.s = words

    @classmethod
    def from_state(cls, words: list[int]) -> "Xoshiro256StarStar":
        rng = cls.__new__(cls)
        rng.s = [w & MASK64 for w in words]
        return rng

    def next_u64(self) -> int:
        s = self.s
        result = (_rotl((s[1] * 5) & MASK64, 7) * 9) & MASK64
        t = (s[1] << 17) & MASK64
        s[2] ^= s[0]
        s[3] ^= s[1]
        s[1] ^= s[2]
        s[0] ^= s[3]
        s[2] ^= t
        s[3] = _rotl(s[3], 45)
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def randint(self, lo: int, hi: int) -> int:
        """Integer in [lo, hi)."""
        if hi <= lo:
            raise ValueError("empty range")
        return lo + int(self.random() * (hi - lo))


def derive_stream(seed: int, index: int) -> int:
    """Decorrelated 64-bit stream id number ``index`` for a master seed."""
    _, out = splitmix64((seed + index * GOLDEN) & MASK64)
    return out


def _lane_states(stream_seed: int, n: int) -> list[np.ndarray]:
    """Vectorized xoshiro256** state words for n independent lanes."""
    golden = np.uint64(GOLDEN)
    base = np.uint64(stream_seed & MASK64) + np.arange(n, dtype=np.uint64) * golden
    # scramble the lane roots, then run four splitmix64 steps per lane
    words = []
    x = _splitmix_mix(base + golden)
    for k in range(4):
        offset = np.uint64(((k + 1) * GOLDEN) & MASK64)
        words.append(_splitmix_mix(x + offset))
    return words


def _splitmix_mix(x: np.ndarray) -> np.ndarray:
    z = x.astype(np.uint64)
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def _lanes_next(words: list[np.ndarray]) -> np.ndarray:
    s0, s1, s2, s3 = words
    result = _rotl_vec((s1 * np.uint64(5)), 7) * np.uint64(9)
    t = s1 << np.uint64(17)
    s2 = s2 ^ s0
    s3 = s3 ^ s1
    s1 = s1 ^ s2
    s0 = s0 ^ s3
    s2 = s2 ^ t
    s3 = _rotl_vec(s3, 45)
    words[0], words[1], words[2], words[3] = s0, s1, s2, s3
    return result


def _rotl_vec(x: np.ndarray, k: int) -> np.ndarray:
    return (x << np.uint64(k)) | (x >> np.uint64(64 - k))


def _uniform_from_u64(bits: np.ndarray) -> np.ndarray:
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


def gaussian_field(stream_seed: int, shape: tuple[int, int], sigma: float) -> np.ndarray:
    """N(0, sigma) noise, one independent PRNG lane per pixel (Box-Muller)."""
    n = shape[0] * shape[1]
    lanes = _lane_states(stream_seed, n)
    u1 = _uniform_from_u64(_lanes_next(lanes))
    u2 = _uniform_from_u64(_lanes_next(lanes))
    z = np.sqrt(-2.0 * np.log(1.0 - u1)) * np.cos(2.0 * math.pi * u2)
    return (sigma * z).reshape(shape)


@dataclass
class SynthSpec:
    seed: int = 42
    num_images: int = 200
    height: int = 256
    width: int = 256
    defects_min: int = 1
    defects_max: int = 3
    geometry: str = "rect"  # or "gaussian-bump"
    bump_peak: float = 0.9
    noise_sigma: float = 0.05
    defect_free_fraction: float = 0.3
    num_categories: int = 2
    speckle_count_min: int = 16
    speckle_count_max: int = 48
    speckle_lo: float = 0.3
    speckle_hi: float = 0.5

    def __post_init__(self) -> None:
        if self.geometry not in ("rect", "gaussian-bump"):
            raise ValueError("geometry must be 'rect' or 'gaussian-bump'")
        if not self.bump_peak > 4.0 * self.noise_sigma:
            raise ValueError("defect peak must exceed the noise mean by 4 sigma")
        if not 0.0 <= self.defect_free_fraction <= 1.0:
            raise ValueError("defect_free_fraction must lie in [0, 1]")
        if not 1 <= self.num_categories <= len(_CATEGORY_NAMES):
            raise ValueError(f"num_categories must be 1..{len(_CATEGORY_NAMES)}")
        if self.defects_min < 1 or self.defects_max < self.defects_min:
            raise ValueError("defect count range is empty")


def _place_rects(rng: Xoshiro256StarStar, spec: SynthSpec, count: int) -> list[tuple[int, int, int, int]]:
    """Non-touching rectangles (3 px separation so components stay distinct)."""
    placed: list[tuple[int, int, int, int]] = []
    max_side = max(8, min(40, spec.width // 4, spec.height // 4))
    for _ in range(count):
        for _attempt in range(20):
            w = rng.randint(8, max_side + 1)
            h = rng.randint(8, max_side + 1)
            x = rng.randint(0, spec.width - w)
            y = rng.randint(0, spec.height - h)
            clear = all(
                x - 3 >= px + pw or px - 3 >= x + w or y - 3 >= py + ph or py - 3 >= y + h
                for px, py, pw, ph in placed
            )
            if clear:
                placed.append((x, y, w, h))
                break
    return placed


def _render_image(spec: SynthSpec, index: int):
    """One image: (map float32, mask bool, gt boxes, is_defect)."""
    meta = Xoshiro256StarStar(derive_stream(spec.seed, 2 * index))
    is_defect = meta.random() >= spec.defect_free_fraction
    canvas = np.zeros((spec.height, spec.width), dtype=np.float64)
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    boxes: list[list[float]] = []

    if is_defect:
        count = meta.randint(spec.defects_min, spec.defects_max + 1)
        if spec.geometry == "rect":
            for x, y, w, h in _place_rects(meta, spec, count):
                canvas[y : y + h, x : x + w] = spec.bump_peak
                mask[y : y + h, x : x + w] = True
                boxes.append([float(x), float(y), float(w), float(h), 1])
        else:
            yy, xx = np.mgrid[0 : spec.height, 0 : spec.width]
            for _ in range(count):
                s = meta.uniform(3.0, 8.0)
                half = int(math.ceil(s * math.sqrt(2.0 * math.log(2.0))))
                cx = meta.randint(half + 1, spec.width - half - 1)
                cy = meta.randint(half + 1, spec.height - half - 1)
                bump = spec.bump_peak * np.exp(
                    -((yy - cy) ** 2 + (xx - cx) ** 2) / (2.0 * s * s)
                )
                canvas = np.maximum(canvas, bump)
                region = bump >= spec.bump_peak / 2.0
                mask |= region
                ys, xs = np.nonzero(region)
                boxes.append(
                    [
                        float(xs.min()),
                        float(ys.min()),
                        float(xs.max() - xs.min() + 1),
                        float(ys.max() - ys.min() + 1),
                        1,
                    ]
                )

    # mid-range speckle clutter that a too-low threshold will pick up
    n_speckles = meta.randint(spec.speckle_count_min, spec.speckle_count_max + 1)
    for _ in range(n_speckles):
        sx = meta.randint(0, spec.width)
        sy = meta.randint(0, spec.height)
        value = meta.uniform(spec.speckle_lo, spec.speckle_hi)
        canvas[sy, sx] = max(canvas[sy, sx], value)

    noise = gaussian_field(derive_stream(spec.seed, 2 * index + 1), canvas.shape, spec.noise_sigma)
    values = np.clip(canvas + noise, 0.0, 1.0).astype(np.float32)
    return values, mask, boxes, is_defect


def generate(spec: SynthSpec, out_dir: str | Path) -> tensorio.DatasetManifest:
    """Write maps, masks, stand-in scores and a manifest; returns the manifest.

    Output is a pure function of the spec: rerunning into a fresh directory
    reproduces every byte.
    """
    out_dir = Path(out_dir)
    try:
        (out_dir / "maps").mkdir(parents=True, exist_ok=True)
        (out_dir / "masks").mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {out_dir}: {exc}") from exc

    categories = [
        tensorio.Category(id=i + 1, name=_CATEGORY_NAMES[i][0], object=_CATEGORY_NAMES[i][1])
        for i in range(spec.num_categories)
    ]
    images = []
    for index in range(spec.num_images):
        image_id = index + 1
        values, mask, boxes, is_defect = _render_image(spec, index)
        map_rel = f"maps/{image_id:06d}.npy"
        mask_rel = f"masks/{image_id:06d}.npy"
        tensorio.write_tensor(out_dir / map_rel, values)
        tensorio.write_tensor(out_dir / mask_rel, mask.astype(np.float32))
        images.append(
            tensorio.ImageRecord(
                image_id=image_id,
                category_id=(index % spec.num_categories) + 1,
                width=spec.width,
                height=spec.height,
                anomaly_map=map_rel,
                gt_boxes=boxes if is_defect else [],
                gt_mask=mask_rel,
                label="defect" if is_defect else "normal",
                as_x=1.0 if is_defect else 0.0,
                file_name=f"images/{image_id:06d}.png",
            )
        )
    manifest = tensorio.DatasetManifest(
        version="1",
        categories=categories,
        images=images,
        extra={"generator": {"name": "synth", "seed": spec.seed, "geometry": spec.geometry}},
        root=out_dir,
    )
    tensorio.save_manifest(manifest, out_dir / "manifest.json")
    return tensorio.load_manifest(out_dir / "manifest.json")
