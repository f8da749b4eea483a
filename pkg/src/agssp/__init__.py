"""Toolkit that turns precomputed vision-language embeddings into anomaly
scores, anomaly maps, distillation targets and COCO-format pseudo-defect
boxes, with the evaluation metrics needed to check them."""

__version__ = "0.1.0"
