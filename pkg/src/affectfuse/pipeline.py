"""End-to-end fused prediction: features -> models -> transcription -> fusion.

One pipeline object serves the CLI `predict` command, the HTTP service, and
the latency benchmark; per-stage wall-clock timings are reported on every
call.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .audio_io import AudioClip, pad_or_truncate
from .audio_models import AudioModel, predict as predict_audio
from .errors import AudioTooLong, BackendTimeout, BackendUnavailable, EmptyText
from .features import FeatureConfig, mfcc
from .fusion import FusedPrediction, FusionConfig, fuse
from .text_model import TextModel, predict_text
from .transcription import transcribe

STAGES = ("features", "audio_predict", "transcription", "text_predict", "fuse")


@dataclass
class PipelineResult:
    prediction: FusedPrediction
    transcript: str | None
    timings_ms: dict[str, float] = field(default_factory=dict)
    degraded: bool = False


class FusedPipeline:
    """Immutable after construction; safe for concurrent predict_clip calls."""

    def __init__(
        self,
        feature_cfg: FeatureConfig,
        audio_model: AudioModel,
        text_model: TextModel | None = None,
        backend=None,
        fusion_cfg: FusionConfig | None = None,
        transcription_timeout_ms: float = 10_000,
        transcription_max_retries: int = 0,
        transcription_backoff_ms: float = 250.0,
        audio_only_fallback: bool = True,
    ):
        self.feature_cfg = feature_cfg
        self.audio_model = audio_model
        self.text_model = text_model
        self.backend = backend
        self.fusion_cfg = fusion_cfg or FusionConfig()
        self.transcription_timeout_ms = transcription_timeout_ms
        self.transcription_max_retries = transcription_max_retries
        self.transcription_backoff_ms = transcription_backoff_ms
        self.audio_only_fallback = audio_only_fallback

    def predict_clip(
        self,
        clip: AudioClip,
        transcript: str | None = None,
        clip_id: str | None = None,
    ) -> PipelineResult:
        """Fused prediction for one clip.

        An explicitly supplied transcript bypasses the transcription backend.
        Empty transcripts mean "text modality absent", not an error. Backend
        failures degrade to audio-only when the fallback is enabled,
        otherwise they propagate.
        """
        timings: dict[str, float] = {}
        started = time.perf_counter()

        t0 = time.perf_counter()
        normalized = pad_or_truncate(clip, self.feature_cfg.clip_seconds)
        features = mfcc(normalized, self.feature_cfg)
        timings["features"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        p_audio = predict_audio(self.audio_model, features)
        timings["audio_predict"] = (time.perf_counter() - t0) * 1000.0

        degraded = False
        if transcript is None and self.backend is not None and self.text_model is not None:
            t0 = time.perf_counter()
            try:
                result = transcribe(
                    self.backend,
                    normalized,
                    clip_id=clip_id,
                    timeout_ms=self.transcription_timeout_ms,
                    max_retries=self.transcription_max_retries,
                    backoff_ms=self.transcription_backoff_ms,
                )
                transcript = result.text
            except (BackendTimeout, BackendUnavailable, AudioTooLong):
                if not self.audio_only_fallback:
                    raise
                degraded = True
                transcript = None
            timings["transcription"] = (time.perf_counter() - t0) * 1000.0

        p_text = None
        if transcript and self.text_model is not None:
            t0 = time.perf_counter()
            try:
                p_text = predict_text(self.text_model, transcript)
            except EmptyText:
                p_text = None
            timings["text_predict"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        fused = fuse(p_audio, p_text, self.fusion_cfg)
        timings["fuse"] = (time.perf_counter() - t0) * 1000.0
        timings["end_to_end"] = (time.perf_counter() - started) * 1000.0

        return PipelineResult(
            prediction=fused,
            transcript=transcript if transcript else None,
            timings_ms=timings,
            degraded=degraded,
        )
