"""Text-guided anomaly scoring on precomputed embeddings.

Everything here is closed-form: cosine similarities between patch/global
tokens and averaged normal/anomalous text tokens are pushed through a
two-way softmax to give per-pixel anomaly probabilities, optionally fused
with reference-bank distances for the few-shot mode. No encoder runs here;
inputs arrive as tensors produced elsewhere.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DegenerateMean,
    DimensionMismatch,
    EmptyBank,
    EmptyField,
    EmptyMap,
    SizeMismatch,
    ZeroVector,
)

PROMPT_TEMPLATE = "A photo of {object} with {defect_type} defect, it appears as {defect_features}."

# dot products of unit vectors land within ~d*eps of the true cosine; anything
# below this is indistinguishable from an exact match
_COS_SNAP = 1e-12


@dataclass(frozen=True)
class PromptSpec:
    object: str
    defect_type: str
    defect_features: str


@dataclass
class TextEmbeddingSet:
    """Unit-norm text embeddings for one category: normal rows and anomaly rows."""

    normal: np.ndarray
    anomaly: np.ndarray
    category_id: int = 0

    def __post_init__(self) -> None:
        self.normal = np.asarray(self.normal, dtype=np.float64)
        self.anomaly = np.asarray(self.anomaly, dtype=np.float64)
        for name, mat in (("normal", self.normal), ("anomaly", self.anomaly)):
            if mat.ndim != 2 or mat.shape[0] < 1:
                raise DimensionMismatch(f"{name} embeddings must be a non-empty N x d matrix")
            norms = np.linalg.norm(mat, axis=1)
            if np.any(np.abs(norms - 1.0) > 1e-3):
                raise ValueError(f"{name} embedding rows must be unit-norm within 1e-3")
        if self.normal.shape[1] != self.anomaly.shape[1]:
            raise DimensionMismatch("normal and anomaly embeddings disagree on dimension")

    @property
    def dim(self) -> int:
        return self.normal.shape[1]


@dataclass
class PatchTokenSet:
    """Dense patch tokens from 4 encoder layers plus the global token."""

    layers: np.ndarray  # (4, m, d)
    cls: np.ndarray  # (d,)
    grid: tuple[int, int]

    def __post_init__(self) -> None:
        self.layers = np.asarray(self.layers, dtype=np.float64)
        self.cls = np.asarray(self.cls, dtype=np.float64)
        if self.layers.ndim != 3 or self.layers.shape[0] != 4:
            raise DimensionMismatch(
                f"patch tokens must have shape (4, m, d), got {self.layers.shape}"
            )
        if self.cls.ndim != 1 or self.cls.shape[0] != self.layers.shape[2]:
            raise DimensionMismatch("global token dimension disagrees with patch tokens")
        rows, cols = self.grid
        if rows * cols != self.layers.shape[1]:
            raise DimensionMismatch(
                f"grid {self.grid} does not tile m={self.layers.shape[1]} patches"
            )

    @property
    def dim(self) -> int:
        return self.layers.shape[2]


@dataclass
class MemoryBank:
    """Reference patch tokens from k normal images, one matrix per layer.

    ``per_layer`` holds either one matrix per token layer or a single matrix,
    in which case only the final token layer is scored against it.
    """

    per_layer: list[np.ndarray]
    k: int = 1

    def __post_init__(self) -> None:
        self.per_layer = [np.asarray(m, dtype=np.float64) for m in self.per_layer]
        if not self.per_layer:
            raise EmptyBank("memory bank has no layers")
        for mat in self.per_layer:
            if mat.ndim != 2 or mat.shape[0] < 1:
                raise EmptyBank("memory bank layer has no reference tokens")
        dims = {m.shape[1] for m in self.per_layer}
        rows = {m.shape[0] for m in self.per_layer}
        if len(dims) != 1 or len(rows) != 1:
            raise DimensionMismatch("memory bank layers disagree on shape")


@dataclass
class ScoringConfig:
    tau: float = 0.07
    mode: str = "zero-shot"  # or "few-shot"
    fusion_layers: tuple[int, ...] = (0, 1, 2, 3)

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError("temperature must be positive")
        if not self.fusion_layers:
            raise ValueError("at least one fusion layer is required")


def build_prompt(spec: PromptSpec) -> str:
    """Render the anomaly prompt template for one defect description."""
    for name in ("object", "defect_type", "defect_features"):
        if not getattr(spec, name):
            raise EmptyField(f"prompt field {name!r} must be non-empty")
    return PROMPT_TEMPLATE.format(
        object=spec.object,
        defect_type=spec.defect_type,
        defect_features=spec.defect_features,
    )


def _unit(vec: np.ndarray) -> np.ndarray:
    vec = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(vec)
    if norm < 1e-12:
        raise ZeroVector("cannot take cosine of a zero vector")
    return vec / norm


def _unit_rows(mat: np.ndarray) -> np.ndarray:
    mat = np.asarray(mat, dtype=np.float64)
    norms = np.linalg.norm(mat, axis=1, keepdims=True)
    if np.any(norms < 1e-12):
        raise ZeroVector("cannot take cosine of a zero vector")
    return mat / norms


def average_text_tokens(embeddings: np.ndarray) -> np.ndarray:
    """Arithmetic mean over rows, renormalized to unit Euclidean norm."""
    mat = np.asarray(embeddings, dtype=np.float64)
    if mat.ndim != 2 or mat.shape[0] < 1:
        raise DimensionMismatch("expected a non-empty N x d matrix")
    mean = mat.mean(axis=0)
    norm = np.linalg.norm(mean)
    if norm < 1e-8:
        raise DegenerateMean("mean text token has vanishing norm; cannot renormalize")
    return mean / norm


def _two_way_softmax(sim_normal: np.ndarray, sim_anomaly: np.ndarray, tau: float) -> np.ndarray:
    """exp(s-/tau) / (exp(s+/tau) + exp(s-/tau)), stabilized by max subtraction."""
    pos = np.asarray(sim_normal, dtype=np.float64) / tau
    neg = np.asarray(sim_anomaly, dtype=np.float64) / tau
    top = np.maximum(pos, neg)
    e_pos = np.exp(pos - top)
    e_neg = np.exp(neg - top)
    return e_neg / (e_pos + e_neg)


def anomaly_score(
    feature: np.ndarray,
    normal_token: np.ndarray,
    anomaly_token: np.ndarray,
    tau: float = 0.07,
) -> float:
    """Probability-like anomaly score of one feature vector in [0, 1].

    Higher when the feature points toward the anomaly text token; exactly 0.5
    when it is equidistant from the two tokens.
    """
    if tau <= 0:
        raise ValueError("temperature must be positive")
    f = _unit(feature)
    t_pos = _unit(normal_token)
    t_neg = _unit(anomaly_token)
    if not (f.shape == t_pos.shape == t_neg.shape):
        raise DimensionMismatch("feature and text tokens disagree on dimension")
    return float(_two_way_softmax(f @ t_pos, f @ t_neg, tau))


def image_score(tokens: PatchTokenSet, text: TextEmbeddingSet, cfg: ScoringConfig) -> float:
    """Image-level anomaly score from the global token."""
    if tokens.dim != text.dim:
        raise DimensionMismatch(
            f"token dimension {tokens.dim} != text dimension {text.dim}"
        )
    t_pos = average_text_tokens(text.normal)
    t_neg = average_text_tokens(text.anomaly)
    return anomaly_score(tokens.cls, t_pos, t_neg, cfg.tau)


def bilinear_resize(src: np.ndarray, out_size: tuple[int, int]) -> np.ndarray:
    """Resize a 2D grid with half-pixel-center sampling and border clamping.

    Output values are convex combinations of the source, so they never leave
    [min(src), max(src)]. Same-size calls return an identical copy.
    """
    src = np.asarray(src, dtype=np.float64)
    if src.ndim != 2 or src.shape[0] < 1 or src.shape[1] < 1:
        raise SizeMismatch(f"source must be a non-empty 2D grid, got shape {src.shape}")
    out_h, out_w = out_size
    if out_h < 1 or out_w < 1:
        raise SizeMismatch(f"output size must be positive, got {out_size}")
    in_h, in_w = src.shape
    if (in_h, in_w) == (out_h, out_w):
        return src.copy()

    ys = (np.arange(out_h) + 0.5) * in_h / out_h - 0.5
    xs = (np.arange(out_w) + 0.5) * in_w / out_w - 0.5
    ys = np.clip(ys, 0.0, in_h - 1.0)
    xs = np.clip(xs, 0.0, in_w - 1.0)
    y0 = np.floor(ys).astype(int)
    x0 = np.floor(xs).astype(int)
    y1 = np.minimum(y0 + 1, in_h - 1)
    x1 = np.minimum(x0 + 1, in_w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]

    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bottom = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bottom * fy


def zero_shot_map(
    tokens: PatchTokenSet,
    text: TextEmbeddingSet,
    cfg: ScoringConfig,
    out_size: tuple[int, int],
) -> np.ndarray:
    """Per-pixel anomaly probabilities from patch tokens and text tokens.

    Each selected layer is scored patch-by-patch, reshaped to its grid,
    upsampled to ``out_size`` and the layer maps are averaged.
    """
    if tokens.dim != text.dim:
        raise DimensionMismatch(
            f"token dimension {tokens.dim} != text dimension {text.dim}"
        )
    t_pos = average_text_tokens(text.normal)
    t_neg = average_text_tokens(text.anomaly)
    rows, cols = tokens.grid
    maps = []
    for layer in cfg.fusion_layers:
        patches = _unit_rows(tokens.layers[layer])
        scores = _two_way_softmax(patches @ t_pos, patches @ t_neg, cfg.tau)
        maps.append(bilinear_resize(scores.reshape(rows, cols), out_size))
    return np.mean(maps, axis=0)


def _bank_distances(patches: np.ndarray, references: np.ndarray) -> np.ndarray:
    """Per patch: min over references of half the cosine distance, in [0, 1].

    Scores below the rounding floor of the dot product are snapped to an
    exact 0 so a token that appears verbatim in the bank scores 0.
    """
    p = _unit_rows(patches)
    r = _unit_rows(references)
    best = np.clip((p @ r.T).max(axis=1), -1.0, 1.0)
    dist = 0.5 * (1.0 - best)
    dist[dist < _COS_SNAP] = 0.0
    return dist


def few_shot_map(
    tokens: PatchTokenSet,
    bank: MemoryBank,
    out_size: tuple[int, int],
) -> np.ndarray:
    """Reference-bank anomaly map: distance of every patch to its nearest
    normal reference token, fused across layers like the zero-shot map."""
    n_layers = tokens.layers.shape[0]
    if bank.per_layer[0].shape[1] != tokens.dim:
        raise DimensionMismatch(
            f"bank dimension {bank.per_layer[0].shape[1]} != token dimension {tokens.dim}"
        )
    if len(bank.per_layer) == n_layers:
        pairs = list(enumerate(bank.per_layer))
    elif len(bank.per_layer) == 1:
        pairs = [(n_layers - 1, bank.per_layer[0])]
    else:
        raise DimensionMismatch(
            f"bank has {len(bank.per_layer)} layers; expected 1 or {n_layers}"
        )
    rows, cols = tokens.grid
    maps = []
    for layer, refs in pairs:
        dist = _bank_distances(tokens.layers[layer], refs)
        maps.append(bilinear_resize(dist.reshape(rows, cols), out_size))
    return np.mean(maps, axis=0)


def combined_map(zero: np.ndarray, few: np.ndarray) -> np.ndarray:
    """Elementwise sum of the zero-shot and few-shot maps (range [0, 2])."""
    zero = np.asarray(zero, dtype=np.float64)
    few = np.asarray(few, dtype=np.float64)
    if zero.shape != few.shape:
        raise SizeMismatch(f"map shapes differ: {zero.shape} vs {few.shape}")
    return zero + few


def final_score(anomaly_map: np.ndarray, as_x: float) -> float:
    """Image-level final score: map maximum plus the global-token score."""
    arr = np.asarray(anomaly_map, dtype=np.float64)
    if arr.size == 0:
        raise EmptyMap("cannot take the maximum of an empty map")
    return float(arr.max() + as_x)
