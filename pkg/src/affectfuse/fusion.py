"""Late fusion of acoustic and textual emotion distributions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from .errors import InvalidDistribution, NoModalities
from .taxonomy import EmotionDistribution, EmotionLabel

ARGMAX_TIE_EPS = 1e-12
PRODUCT_FLOOR = 1e-12


class FusionConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    strategy: Literal["linear", "product", "max_confidence"] = "linear"
    audio_weight: float = Field(default=0.5, ge=0.0, le=1.0)


@dataclass(frozen=True)
class FusedPrediction:
    distribution: EmotionDistribution
    label: EmotionLabel
    modalities_used: frozenset[str]
    strategy: str


def decide(d: EmotionDistribution) -> EmotionLabel:
    """Argmax label; entries within 1e-12 of the max tie-break to the lowest index."""
    probs = d.probs
    if probs.shape != (8,) or not np.all(np.isfinite(probs)):
        raise InvalidDistribution(f"not a valid distribution: shape {probs.shape}")
    winner = int(np.nonzero(probs >= probs.max() - ARGMAX_TIE_EPS)[0][0])
    return EmotionLabel(winner)


def fuse(
    p_audio: EmotionDistribution | None,
    p_text: EmotionDistribution | None,
    cfg: FusionConfig,
) -> FusedPrediction:
    """Combine per-modality distributions under the configured strategy.

    linear: w * p_audio + (1-w) * p_text; product: elementwise product with a
    1e-12 floor, renormalized; max_confidence: the input whose maximum entry
    is larger (audio on ties). A single present modality passes through
    unchanged.

    Raises:
        NoModalities: both inputs absent.
        InvalidDistribution: an input fails simplex validation.
    """
    if p_audio is None and p_text is None:
        raise NoModalities("fusion needs at least one modality")

    present: dict[str, EmotionDistribution] = {}
    if p_audio is not None:
        present["audio"] = EmotionDistribution.from_probs(p_audio.probs)
    if p_text is not None:
        present["text"] = EmotionDistribution.from_probs(p_text.probs)

    if len(present) == 1:
        modality, dist = next(iter(present.items()))
        return FusedPrediction(
            distribution=dist,
            label=decide(dist),
            modalities_used=frozenset({modality}),
            strategy=cfg.strategy,
        )

    a, t = present["audio"].probs, present["text"].probs
    if cfg.strategy == "linear":
        # No renormalization: keeps the w in {0, 1} reductions bit-exact.
        w = cfg.audio_weight
        fused = w * a + (1.0 - w) * t
    elif cfg.strategy == "product":
        fused = np.maximum(a, PRODUCT_FLOOR) * np.maximum(t, PRODUCT_FLOOR)
        fused = fused / fused.sum()
    else:  # max_confidence
        fused = a if a.max() >= t.max() else t

    dist = EmotionDistribution.from_probs(fused)
    return FusedPrediction(
        distribution=dist,
        label=decide(dist),
        modalities_used=frozenset({"audio", "text"}),
        strategy=cfg.strategy,
    )
