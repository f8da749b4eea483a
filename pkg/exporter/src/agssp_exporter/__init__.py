"""Exports per-image patch tokens, global tokens and prompt-set text
embeddings in the dataset formats the anomaly-scoring toolkit consumes."""

__version__ = "0.1.0"
