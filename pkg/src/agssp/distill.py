"""Distillation targets: attention maps, alignment losses with analytic
gradients, and the first-iteration loss-balance rule.

The losses are pure math for verification and target export; no optimizer
lives here. Gradients are taken with respect to attention-map values; a
helper chains them back through the channelwise sum of squares onto raw
feature maps.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateNorm, SizeMismatch, ZeroMap, ZeroTaskLoss
from .scoring import bilinear_resize

NORM_NONE = "none"
NORM_L2_FLATTEN = "l2-flatten"

_NORM_FLOOR = 1e-8


@dataclass
class DistillBatch:
    """Per-layer (attention map, resized target map) pairs to align."""

    layers: list[tuple[np.ndarray, np.ndarray]]
    loss_kind: str = "l2"  # "l2" or "cosine"
    normalization: str = NORM_L2_FLATTEN

    def __post_init__(self) -> None:
        if not self.layers:
            raise SizeMismatch("a distillation batch needs at least one layer")
        checked = []
        for i, (attention, target) in enumerate(self.layers):
            attention = np.asarray(attention, dtype=np.float64)
            target = np.asarray(target, dtype=np.float64)
            if attention.shape != target.shape or attention.ndim != 2:
                raise SizeMismatch(
                    f"layer {i}: attention {attention.shape} vs target {target.shape}"
                )
            checked.append((attention, target))
        self.layers = checked
        if self.loss_kind not in ("l2", "cosine"):
            raise ValueError(f"unknown loss kind {self.loss_kind!r}")
        if self.normalization not in (NORM_NONE, NORM_L2_FLATTEN):
            raise ValueError(f"unknown normalization {self.normalization!r}")


@dataclass
class LambdaBalance:
    l_distill_0: float
    l_task_0: float
    lambda_: float = field(init=False)

    def __post_init__(self) -> None:
        if not (np.isfinite(self.l_distill_0) and np.isfinite(self.l_task_0)):
            raise ValueError("first-iteration losses must be finite")
        if self.l_task_0 == 0.0:
            raise ZeroTaskLoss("task loss is zero; the balance ratio is undefined")
        if self.l_task_0 < 0.0:
            raise ValueError("task loss must be positive")
        self.lambda_ = self.l_distill_0 / self.l_task_0


def attention_map(features: np.ndarray) -> np.ndarray:
    """Collapse a (C, H, W) feature map to (H, W) by summing squares over channels."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3:
        raise SizeMismatch(f"expected (C, H, W) features, got shape {features.shape}")
    return np.square(features).sum(axis=0)


def attention_grad_to_features(grad: np.ndarray, features: np.ndarray) -> np.ndarray:
    """Chain an attention-map gradient back onto the raw features (factor 2f)."""
    grad = np.asarray(grad, dtype=np.float64)
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 3 or grad.shape != features.shape[1:]:
        raise SizeMismatch(
            f"gradient {grad.shape} does not match features {features.shape}"
        )
    return 2.0 * features * grad[None, :, :]


def _flat_norm(values: np.ndarray, what: str, error: type[Exception]) -> float:
    norm = float(np.linalg.norm(values))
    if norm < _NORM_FLOOR:
        raise error(f"{what} has vanishing norm; cannot normalize")
    return norm


def l2_distill_loss(batch: DistillBatch) -> tuple[float, list[np.ndarray]]:
    """Mean-squared alignment loss summed over layers, plus d(loss)/d(attention).

    With the default l2-flatten normalization both maps are scaled to unit
    Euclidean norm before the comparison; ``none`` compares raw values.
    """
    loss = 0.0
    grads: list[np.ndarray] = []
    for attention, target in batch.layers:
        n = attention.size
        if batch.normalization == NORM_L2_FLATTEN:
            na = _flat_norm(attention, "attention map", DegenerateNorm)
            nm = _flat_norm(target, "target map", DegenerateNorm)
            a_hat = attention / na
            m_hat = target / nm
            residual = a_hat - m_hat
            loss += float(np.square(residual).sum()) / n
            g_hat = 2.0 * residual / n
            grad = (g_hat - a_hat * float((a_hat * g_hat).sum())) / na
        else:
            residual = attention - target
            loss += float(np.square(residual).sum()) / n
            grad = 2.0 * residual / n
        grads.append(grad)
    return loss, grads


def cosine_distill_loss(batch: DistillBatch) -> tuple[float, list[np.ndarray]]:
    """Sum over layers of one minus the cosine of the flattened maps."""
    loss = 0.0
    grads: list[np.ndarray] = []
    for attention, target in batch.layers:
        na = _flat_norm(attention, "attention map", ZeroMap)
        nm = _flat_norm(target, "target map", ZeroMap)
        cos = float((attention * target).sum()) / (na * nm)
        loss += 1.0 - cos
        grad = cos * attention / (na * na) - target / (na * nm)
        grads.append(grad)
    return loss, grads


def distill_loss(batch: DistillBatch) -> tuple[float, list[np.ndarray]]:
    """Dispatch on the batch's loss kind."""
    if batch.loss_kind == "cosine":
        return cosine_distill_loss(batch)
    return l2_distill_loss(batch)


def resize_target(anomaly_map: np.ndarray, layer_dims: tuple[int, int]) -> np.ndarray:
    """Resize an anomaly map to a feature layer's spatial dimensions."""
    return bilinear_resize(anomaly_map, layer_dims)


def compute_lambda(l_distill_0: float, l_task_0: float) -> LambdaBalance:
    """Balance weight from the first-iteration loss ratio."""
    return LambdaBalance(float(l_distill_0), float(l_task_0))


def total_loss(l_distill: float, l_task: float, lambda_: float) -> float:
    """Combined objective: distillation loss plus the weighted task loss."""
    if lambda_ < 0:
        raise ValueError("lambda must be non-negative")
    return l_distill + lambda_ * l_task
