"""Canonical eight-class emotion taxonomy and probability vectors over it.

The class order is alphabetical and fixed; every probability vector, model
output layer, and confusion-matrix axis in the package is aligned to it.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import InvalidDistribution, UnmappableLabel

N_CLASSES = 8


class EmotionLabel(enum.IntEnum):
    """Canonical emotion classes; integer value is the class index."""

    ANGRY = 0
    CALM = 1
    DISGUST = 2
    FEAR = 3
    HAPPY = 4
    NEUTRAL = 5
    SAD = 6
    SURPRISE = 7

    @property
    def label(self) -> str:
        """Serialized form: the lowercase name."""
        return self.name.lower()

    @classmethod
    def from_name(cls, name: str) -> "EmotionLabel":
        try:
            return cls[name.strip().upper()]
        except KeyError:
            raise UnmappableLabel(f"not a canonical emotion label: {name!r}") from None


CANONICAL_LABELS: tuple[str, ...] = tuple(lbl.label for lbl in EmotionLabel)

# Synonym folding for raw corpus/tweet label tokens (keys are pre-normalized:
# lowercase, whitespace and hyphens collapsed to underscores).
_SYNONYMS: dict[str, EmotionLabel] = {
    "angry": EmotionLabel.ANGRY,
    "anger": EmotionLabel.ANGRY,
    "calm": EmotionLabel.CALM,
    "disgust": EmotionLabel.DISGUST,
    "disgusted": EmotionLabel.DISGUST,
    "fear": EmotionLabel.FEAR,
    "fearful": EmotionLabel.FEAR,
    "afraid": EmotionLabel.FEAR,
    "happy": EmotionLabel.HAPPY,
    "happiness": EmotionLabel.HAPPY,
    "joy": EmotionLabel.HAPPY,
    "neutral": EmotionLabel.NEUTRAL,
    "sad": EmotionLabel.SAD,
    "sadness": EmotionLabel.SAD,
    "surprise": EmotionLabel.SURPRISE,
    "surprised": EmotionLabel.SURPRISE,
    "pleasant_surprise": EmotionLabel.SURPRISE,
    "pleasant_surprised": EmotionLabel.SURPRISE,
    "ps": EmotionLabel.SURPRISE,
}


def normalize_label(raw: str, corpus: str | None = None) -> EmotionLabel:
    """Map a raw label token into the canonical taxonomy.

    Folding is case-insensitive and treats spaces/hyphens as underscores.
    Idempotent: canonical names map to themselves.

    Raises:
        UnmappableLabel: token has no canonical mapping.
    """
    token = raw.strip().lower().replace("-", "_")
    token = "_".join(token.split())
    label = _SYNONYMS.get(token)
    if label is None:
        where = f" (corpus {corpus})" if corpus else ""
        raise UnmappableLabel(f"unmappable label token {raw!r}{where}")
    return label


@dataclass(frozen=True, eq=False)
class EmotionDistribution:
    """Length-8 probability vector aligned to :class:`EmotionLabel` indices."""

    probs: np.ndarray

    @classmethod
    def from_probs(cls, probs) -> "EmotionDistribution":
        """Validate and wrap a probability vector.

        Raises:
            InvalidDistribution: wrong length, entry < -1e-9, or sum off by
                more than 1e-6.
        """
        arr = np.asarray(probs, dtype=np.float64)
        if arr.shape != (N_CLASSES,):
            raise InvalidDistribution(f"expected shape ({N_CLASSES},), got {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvalidDistribution("non-finite probability entry")
        if np.any(arr < -1e-9):
            raise InvalidDistribution(f"negative probability entry: min={arr.min():.3e}")
        total = float(arr.sum())
        if abs(total - 1.0) > 1e-6:
            raise InvalidDistribution(f"probabilities sum to {total!r}, not 1")
        return cls(np.clip(arr, 0.0, None))

    def as_dict(self) -> dict[str, float]:
        return {name: float(p) for name, p in zip(CANONICAL_LABELS, self.probs)}


def uniform_distribution() -> EmotionDistribution:
    return EmotionDistribution(np.full(N_CLASSES, 1.0 / N_CLASSES))


def one_hot(label: EmotionLabel) -> EmotionDistribution:
    probs = np.zeros(N_CLASSES)
    probs[int(label)] = 1.0
    return EmotionDistribution(probs)
