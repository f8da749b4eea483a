"""Encoder backends.

``seeded`` is a deterministic, dependency-light stand-in with the exact
token geometry of each preset: it patchifies the image and pushes patches
through fixed random projections. It exists so exports (and the downstream
contract tests) run hermetically on machines without model weights.

``openclip`` wraps an installed open_clip model and taps four evenly spaced
transformer blocks for dense tokens; it needs the optional open_clip
dependency plus downloadable weights and raises EncoderLoadFailure when
either is missing. Local-attention token surgery is delegated to the wrapped
implementation when one provides it; otherwise plain tokens are exported and
the manifest carries ``"vv_attention": false``.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np


class EncoderLoadFailure(RuntimeError):
    pass


class DecodeFailure(RuntimeError):
    pass


@dataclass(frozen=True)
class Preset:
    name: str
    model: str
    pretrained: str
    resolution: int
    patch: int
    depth: int
    dim: int

    @property
    def grid(self) -> int:
        return self.resolution // self.patch

    @property
    def num_patches(self) -> int:
        return self.grid * self.grid

    def default_layers(self) -> list[int]:
        # four evenly distributed block indices, 1-based, ending at the top
        return [self.depth * k // 4 for k in (1, 2, 3, 4)]


PRESETS = {
    "base": Preset("base", "ViT-B-16-plus-240", "laion400m_e32", 240, 16, 12, 640),
    "large": Preset("large", "ViT-L-14-336", "openai", 336, 14, 24, 768),
    "huge": Preset("huge", "ViT-H-14-378-quickgelu", "dfn5b", 378, 14, 32, 1024),
    # small geometry for tests and smoke runs
    "tiny": Preset("tiny", "seeded-tiny", "none", 32, 8, 4, 32),
}


@dataclass
class ExportConfig:
    preset: str = "huge"
    backend: str = "seeded"  # or "openclip"
    layer_indices: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        spec = PRESETS[self.preset]
        if not self.layer_indices:
            self.layer_indices = spec.default_layers()
        if len(self.layer_indices) != 4:
            raise ValueError("exactly 4 layer indices are required")
        if sorted(set(self.layer_indices)) != self.layer_indices:
            raise ValueError("layer indices must be strictly increasing")
        if self.layer_indices[0] < 1 or self.layer_indices[-1] > spec.depth:
            raise ValueError(
                f"layer indices must lie in 1..{spec.depth} for preset {self.preset}"
            )

    @property
    def spec(self) -> Preset:
        return PRESETS[self.preset]


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    return mat / np.linalg.norm(mat, axis=-1, keepdims=True)


def load_image(path) -> np.ndarray:
    """Decode to (H, W, 3) uint8; DecodeFailure on anything unreadable."""
    from PIL import Image, UnidentifiedImageError

    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (UnidentifiedImageError, OSError) as exc:
        raise DecodeFailure(f"cannot decode {path}: {exc}") from exc


class SeededEncoder:
    """Deterministic random-projection encoder with real preset geometry."""

    vv_attention = False

    def __init__(self, config: ExportConfig):
        self.config = config
        spec = config.spec
        seed = int.from_bytes(
            hashlib.blake2b(spec.name.encode(), digest_size=8).digest(), "little"
        )
        rng = np.random.default_rng(seed)
        patch_dim = spec.patch * spec.patch * 3
        scale = 1.0 / np.sqrt(patch_dim)
        self._w_in = rng.standard_normal((patch_dim, spec.dim)) * scale
        self._w_layer = [
            rng.standard_normal((spec.dim, spec.dim)) / np.sqrt(spec.dim)
            for _ in range(4)
        ]
        self._b_layer = [rng.standard_normal(spec.dim) * 0.1 for _ in range(4)]
        self._w_cls = rng.standard_normal((spec.dim, spec.dim)) / np.sqrt(spec.dim)

    def _patchify(self, rgb: np.ndarray) -> np.ndarray:
        from PIL import Image

        spec = self.config.spec
        resized = Image.fromarray(rgb).resize(
            (spec.resolution, spec.resolution), Image.BILINEAR
        )
        pixels = np.asarray(resized, dtype=np.float64) / 255.0
        g = spec.grid
        patches = (
            pixels.reshape(g, spec.patch, g, spec.patch, 3)
            .transpose(0, 2, 1, 3, 4)
            .reshape(g * g, -1)
        )
        return patches

    def encode_image(self, rgb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Returns (patch tokens (4, m, d) unit rows, global token (d,))."""
        hidden = np.tanh(self._patchify(rgb) @ self._w_in)
        layers = []
        for w, b in zip(self._w_layer, self._b_layer):
            hidden = np.tanh(hidden @ w + b)
            layers.append(_unit_rows(hidden))
        tokens = np.stack(layers).astype(np.float32)
        pooled = layers[-1].mean(axis=0) @ self._w_cls
        cls = (pooled / np.linalg.norm(pooled)).astype(np.float32)
        return tokens, cls

    def encode_text(self, prompts: list[str]) -> np.ndarray:
        """One unit row per prompt, a pure function of the prompt text."""
        rows = []
        for prompt in prompts:
            digest = hashlib.blake2b(prompt.encode("utf-8"), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            vec = rng.standard_normal(self.config.spec.dim)
            rows.append(vec / np.linalg.norm(vec))
        return np.asarray(rows, dtype=np.float32)


class OpenClipEncoder:
    """Wraps an installed open_clip model; no model math lives here."""

    vv_attention = False

    def __init__(self, config: ExportConfig):
        try:
            import open_clip
            import torch
        except ImportError as exc:
            raise EncoderLoadFailure(
                "the openclip backend needs the open_clip_torch package"
            ) from exc
        spec = config.spec
        try:
            model, _, preprocess = open_clip.create_model_and_transforms(
                spec.model, pretrained=spec.pretrained
            )
            self._tokenizer = open_clip.get_tokenizer(spec.model)
        except Exception as exc:
            raise EncoderLoadFailure(f"cannot load {spec.model}: {exc}") from exc
        self.config = config
        self._torch = torch
        self._model = model.eval()
        self._preprocess = preprocess

    def encode_image(self, rgb: np.ndarray):
        from PIL import Image

        torch = self._torch
        spec = self.config.spec
        visual = self._model.visual
        captured: dict[int, object] = {}
        hooks = []
        blocks = visual.transformer.resblocks
        for index in self.config.layer_indices:
            hooks.append(
                blocks[index - 1].register_forward_hook(
                    lambda _m, _i, out, index=index: captured.__setitem__(index, out)
                )
            )
        try:
            with torch.no_grad():
                tensor = self._preprocess(Image.fromarray(rgb)).unsqueeze(0)
                cls = self._model.encode_image(tensor)[0]
        finally:
            for hook in hooks:
                hook.remove()
        layers = []
        with torch.no_grad():
            for index in self.config.layer_indices:
                out = captured[index]
                if out.shape[0] != 1:  # LND layout
                    out = out.permute(1, 0, 2)
                patches = out[0, 1:, :]  # drop the class position
                patches = visual.ln_post(patches) @ visual.proj
                patches = patches / patches.norm(dim=-1, keepdim=True)
                layers.append(patches.cpu().numpy())
        tokens = np.stack(layers).astype(np.float32)
        if tokens.shape[1] != spec.num_patches:
            raise EncoderLoadFailure(
                f"{spec.model} produced {tokens.shape[1]} patches, expected {spec.num_patches}"
            )
        cls = cls / cls.norm()
        return tokens, cls.cpu().numpy().astype(np.float32)

    def encode_text(self, prompts: list[str]) -> np.ndarray:
        torch = self._torch
        with torch.no_grad():
            features = self._model.encode_text(self._tokenizer(prompts))
            features = features / features.norm(dim=-1, keepdim=True)
        return features.cpu().numpy().astype(np.float32)


def make_encoder(config: ExportConfig):
    if config.backend == "seeded":
        return SeededEncoder(config)
    if config.backend == "openclip":
        return OpenClipEncoder(config)
    raise ValueError(f"unknown backend {config.backend!r}")
