"""Hybrid speech/text emotion recognition toolkit."""

__version__ = "0.1.0"

from .taxonomy import CANONICAL_LABELS, EmotionDistribution, EmotionLabel, normalize_label

__all__ = [
    "CANONICAL_LABELS",
    "EmotionDistribution",
    "EmotionLabel",
    "normalize_label",
    "__version__",
]
