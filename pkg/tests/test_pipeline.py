import numpy as np
import pytest

from affectfuse.errors import BackendUnavailable
from affectfuse.pipeline import FusedPipeline
from affectfuse.transcription import MockBackend

from synth import emotion_clip


@pytest.fixture(scope="module")
def pipeline(small_audio_setup, small_text_setup):
    return FusedPipeline(
        feature_cfg=small_audio_setup["feature_cfg"],
        audio_model=small_audio_setup["model"],
        text_model=small_text_setup["model"],
        backend=MockBackend({"known": "i am so happy today"}),
    )


def make_clip(seed=0, seconds=2.8):
    return emotion_clip("angry", np.random.default_rng(seed), seconds=seconds)


class TestFusedPipeline:
    def test_fused_prediction_with_known_clip(self, pipeline):
        result = pipeline.predict_clip(make_clip(), clip_id="known")
        assert result.prediction.modalities_used == frozenset({"audio", "text"})
        assert result.transcript == "i am so happy today"
        assert result.prediction.distribution.probs.sum() == pytest.approx(1.0, abs=1e-6)
        for stage in ("features", "audio_predict", "transcription", "text_predict", "fuse", "end_to_end"):
            assert stage in result.timings_ms

    def test_unknown_clip_is_audio_only(self, pipeline):
        result = pipeline.predict_clip(make_clip(), clip_id="mystery")
        assert result.prediction.modalities_used == frozenset({"audio"})
        assert result.transcript is None
        assert result.degraded is False

    def test_explicit_transcript_skips_backend(self, pipeline):
        calls = []
        backend = pipeline.backend
        original = backend.transcribe_raw
        backend.transcribe_raw = lambda clip, cid: calls.append(cid) or original(clip, cid)
        try:
            result = pipeline.predict_clip(make_clip(), transcript="what a shock")
        finally:
            backend.transcribe_raw = original
        assert calls == []
        assert result.prediction.modalities_used == frozenset({"audio", "text"})
        assert "transcription" not in result.timings_ms

    def test_backend_failure_degrades_when_fallback_enabled(self, small_audio_setup, small_text_setup):
        class Down:
            backend_id = "down"
            max_clip_seconds = None

            def transcribe_raw(self, clip, clip_id):
                raise BackendUnavailable("nope")

        pipeline = FusedPipeline(
            feature_cfg=small_audio_setup["feature_cfg"],
            audio_model=small_audio_setup["model"],
            text_model=small_text_setup["model"],
            backend=Down(),
            audio_only_fallback=True,
        )
        result = pipeline.predict_clip(make_clip())
        assert result.degraded is True
        assert result.prediction.modalities_used == frozenset({"audio"})

    def test_backend_failure_raises_when_fallback_disabled(self, small_audio_setup, small_text_setup):
        class Down:
            backend_id = "down"
            max_clip_seconds = None

            def transcribe_raw(self, clip, clip_id):
                raise BackendUnavailable("nope")

        pipeline = FusedPipeline(
            feature_cfg=small_audio_setup["feature_cfg"],
            audio_model=small_audio_setup["model"],
            text_model=small_text_setup["model"],
            backend=Down(),
            audio_only_fallback=False,
        )
        with pytest.raises(BackendUnavailable):
            pipeline.predict_clip(make_clip())

    def test_audio_only_pipeline_without_text_model(self, small_audio_setup):
        pipeline = FusedPipeline(
            feature_cfg=small_audio_setup["feature_cfg"],
            audio_model=small_audio_setup["model"],
        )
        result = pipeline.predict_clip(make_clip())
        assert result.prediction.modalities_used == frozenset({"audio"})

    def test_short_clip_padded_not_rejected(self, pipeline):
        result = pipeline.predict_clip(make_clip(seconds=0.8))
        assert result.prediction.distribution.probs.sum() == pytest.approx(1.0, abs=1e-6)
