import numpy as np
import pytest

from affectfuse.audio_io import AudioClip
from affectfuse.errors import ClipTooShort, EmptyMatrix, InvalidBand
from affectfuse.features import (
    FeatureCache,
    FeatureConfig,
    ManifestFeatureSource,
    MfccMatrix,
    aggregate_mean,
    dct_matrix,
    hz_to_mel,
    mel_filterbank,
    mfcc,
    stft_magnitude,
)

from oracles import (
    oracle_dft_magnitude,
    oracle_mel_centers_hz,
    oracle_mel_filterbank,
    oracle_dct_ii_matrix,
    oracle_mfcc,
)


def white_clip(cfg: FeatureConfig, seed: int) -> AudioClip:
    rng = np.random.default_rng(seed)
    n = cfg.clip_samples
    return AudioClip(rng.uniform(-0.8, 0.8, n), cfg.target_sample_rate)


class TestFeatureConfig:
    def test_defaults_are_valid(self):
        cfg = FeatureConfig()
        assert cfg.n_frames == 1 + (66150 - 2048) // 512
        assert cfg.n_bins == 1025

    @pytest.mark.parametrize(
        "bad",
        [
            dict(n_mfcc=200),                # > n_mels
            dict(frame_length=4096),         # > n_fft
            dict(fmin=12000.0),              # >= fmax
            dict(fmax=22050.0),              # > rate/2
            dict(log_floor=0.0),
            dict(hop_length=0),
        ],
    )
    def test_invariants_enforced(self, bad):
        with pytest.raises(ValueError):
            FeatureConfig(**bad)

    def test_hash_is_stable_and_sensitive(self):
        assert FeatureConfig().config_hash() == FeatureConfig().config_hash()
        assert FeatureConfig().config_hash() != FeatureConfig(n_mfcc=20).config_hash()


class TestStft:
    def test_zero_clip_gives_zero_matrix(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        clip = AudioClip(np.zeros(cfg.clip_samples), cfg.target_sample_rate)
        mag = stft_magnitude(clip, cfg)
        assert mag.shape == (cfg.n_frames, cfg.n_bins)
        assert np.all(mag == 0.0)

    def test_bin_centered_sine_peaks_at_its_bin(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        k = 32
        freq = k * cfg.target_sample_rate / cfg.n_fft
        t = np.arange(cfg.clip_samples) / cfg.target_sample_rate
        clip = AudioClip(0.5 * np.sin(2 * np.pi * freq * t), cfg.target_sample_rate)
        mag = stft_magnitude(clip, cfg)
        assert np.all(mag.argmax(axis=1) == k)

    def test_parseval_per_frame(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        clip = white_clip(cfg, 3)
        mag = stft_magnitude(clip, cfg)
        window = np.hanning(cfg.frame_length)
        for t in range(0, cfg.n_frames, 7):
            frame = clip.samples[t * cfg.hop_length : t * cfg.hop_length + cfg.frame_length]
            time_energy = np.sum((frame * window) ** 2)
            spec = mag[t]
            freq_energy = (spec[0] ** 2 + 2 * np.sum(spec[1:-1] ** 2) + spec[-1] ** 2) / cfg.n_fft
            assert freq_energy == pytest.approx(time_energy, rel=1e-6)

    def test_first_frame_starts_at_sample_zero(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        samples = np.zeros(cfg.clip_samples)
        samples[: cfg.frame_length] = np.random.default_rng(0).uniform(-1, 1, cfg.frame_length)
        mag = stft_magnitude(AudioClip(samples, cfg.target_sample_rate), cfg)
        expected = oracle_dft_magnitude(samples[: cfg.frame_length] * np.hanning(cfg.frame_length), cfg.n_fft)
        np.testing.assert_allclose(mag[0], expected, atol=1e-9)

    def test_too_short_clip_rejected(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        with pytest.raises(ClipTooShort):
            stft_magnitude(AudioClip(np.zeros(cfg.frame_length - 1), cfg.target_sample_rate), cfg)


class TestMelFilterbank:
    def test_rows_sum_to_one(self, fast_feature_cfg):
        fb = mel_filterbank(fast_feature_cfg)
        np.testing.assert_allclose(fb.sum(axis=1), 1.0, atol=1e-9)

    def test_entries_nonnegative(self, fast_feature_cfg):
        assert np.all(mel_filterbank(fast_feature_cfg) >= 0.0)

    def test_support_strictly_between_neighbor_centers(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        fb = mel_filterbank(cfg)
        centers = oracle_mel_centers_hz(cfg.fmin, cfg.fmax, cfg.n_mels)
        bin_freqs = np.arange(cfg.n_bins) * cfg.target_sample_rate / cfg.n_fft
        for m in range(cfg.n_mels):
            support = bin_freqs[fb[m] > 0]
            assert np.all(support > centers[m])      # center of filter m-1
            assert np.all(support < centers[m + 2])  # center of filter m+1

    def test_matches_oracle_filterbank(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        ours = mel_filterbank(cfg)
        ref = oracle_mel_filterbank(cfg.n_mels, cfg.n_fft, cfg.target_sample_rate, cfg.fmin, cfg.fmax)
        np.testing.assert_allclose(ours, ref, atol=1e-12)

    def test_invalid_band_rejected(self):
        cfg = FeatureConfig.model_construct(
            **{**FeatureConfig().model_dump(), "fmin": 5000.0, "fmax": 4000.0}
        )
        with pytest.raises(InvalidBand):
            mel_filterbank(cfg)

    def test_degenerate_narrow_band_raises(self):
        cfg = FeatureConfig.model_construct(
            **{
                **FeatureConfig().model_dump(),
                "n_fft": 256,
                "frame_length": 256,
                "n_mels": 128,
                "n_mfcc": 13,
            }
        )
        with pytest.raises(InvalidBand, match="support"):
            mel_filterbank(cfg)

    def test_mel_scale_formula(self):
        assert hz_to_mel(700.0) == pytest.approx(2595.0 * np.log10(2.0))


class TestDct:
    def test_orthonormal(self):
        d = dct_matrix(26)
        np.testing.assert_allclose(d @ d.T, np.eye(26), atol=1e-12)

    def test_matches_oracle_definition(self):
        np.testing.assert_allclose(dct_matrix(17), oracle_dct_ii_matrix(17), atol=1e-12)


class TestMfcc:
    def test_zero_clip_constant_frames(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        clip = AudioClip(np.zeros(cfg.clip_samples), cfg.target_sample_rate)
        out = mfcc(clip, cfg)
        assert out.values.shape == (cfg.n_frames, cfg.n_mfcc)
        # every frame identical; DCT of a constant vector has zero AC terms
        assert np.all(out.values == out.values[0])
        np.testing.assert_allclose(out.values[:, 1:], 0.0, atol=1e-9)
        expected_c0 = np.sqrt(cfg.n_mels) * np.log(cfg.log_floor)
        np.testing.assert_allclose(out.values[:, 0], expected_c0, rtol=1e-12)

    def test_matches_brute_force_oracle(self, fast_feature_cfg):
        cfg = fast_feature_cfg
        for seed in (0, 1):
            clip = white_clip(cfg, seed)
            ours = mfcc(clip, cfg).values
            ref = oracle_mfcc(
                clip.samples, cfg.target_sample_rate, cfg.frame_length, cfg.hop_length,
                cfg.n_fft, cfg.n_mels, cfg.n_mfcc, cfg.fmin, cfg.fmax, cfg.log_floor,
            )
            assert np.max(np.abs(ours - ref)) < 1e-4

    def test_time_reversed_noise_same_c0_multiset(self):
        # Framing must tile the clip exactly for reversal to map frames to
        # frames: (N - frame) % hop == 0 with frame == n_fft.
        sr = 8000
        frame, hop = 256, 128
        n = frame + hop * 40
        cfg = FeatureConfig(
            target_sample_rate=sr, clip_seconds=n / sr, frame_length=frame,
            hop_length=hop, n_fft=frame, n_mels=26, n_mfcc=13, fmax=4000.0,
        )
        rng = np.random.default_rng(12)
        samples = rng.uniform(-0.7, 0.7, n)
        fwd = mfcc(AudioClip(samples, sr), cfg).values[:, 0]
        rev = mfcc(AudioClip(samples[::-1].copy(), sr), cfg).values[:, 0]
        np.testing.assert_allclose(np.sort(fwd), np.sort(rev), atol=1e-6)

    def test_pure_function(self, fast_feature_cfg):
        clip = white_clip(fast_feature_cfg, 9)
        a = mfcc(clip, fast_feature_cfg)
        b = mfcc(clip, fast_feature_cfg)
        assert np.array_equal(a.values, b.values)
        assert a.config_hash == b.config_hash


class TestAggregate:
    def test_single_frame_identity(self):
        values = np.arange(13, dtype=np.float64)[None, :]
        out = aggregate_mean(MfccMatrix(values, "h"))
        np.testing.assert_array_equal(out, values[0])

    def test_opposite_frames_cancel(self):
        v = np.random.default_rng(0).normal(size=13)
        out = aggregate_mean(MfccMatrix(np.stack([v, -v]), "h"))
        np.testing.assert_allclose(out, 0.0, atol=1e-15)

    def test_identical_frames(self):
        v = np.random.default_rng(1).normal(size=13)
        out = aggregate_mean(MfccMatrix(np.tile(v, (130, 1)), "h"))
        np.testing.assert_allclose(out, v, atol=1e-12)

    def test_empty_matrix(self):
        with pytest.raises(EmptyMatrix):
            aggregate_mean(MfccMatrix(np.zeros((0, 13)), "h"))


class TestFeatureCache:
    def test_hit_requires_hash_equality(self, tmp_path, fast_feature_cfg):
        cache = FeatureCache(tmp_path)
        matrix = MfccMatrix(np.ones((4, 13)), fast_feature_cfg.config_hash())
        cache.put("tess:x", matrix)
        hit = cache.get("tess:x", fast_feature_cfg.config_hash())
        assert hit is not None and np.array_equal(hit.values, matrix.values)
        assert cache.get("tess:x", "other-hash") is None
        assert cache.get("tess:unknown", fast_feature_cfg.config_hash()) is None

    def test_manifest_source_uses_cache(self, tmp_path, fast_feature_cfg, monkeypatch):
        from affectfuse.audio_io import save_wav
        from affectfuse.manifest import AudioClipRecord, Corpus
        from affectfuse.taxonomy import EmotionLabel

        cfg = fast_feature_cfg
        wav = tmp_path / "clip.wav"
        save_wav(wav, AudioClip(np.random.default_rng(0).uniform(-0.5, 0.5, cfg.clip_samples), cfg.target_sample_rate))
        record = AudioClipRecord("tess:clip", str(wav), Corpus.TESS, EmotionLabel.HAPPY, "OAF")

        source = ManifestFeatureSource(cfg, cache=FeatureCache(tmp_path / "cache"))
        first = source.features_for(record)
        calls = []
        monkeypatch.setattr("affectfuse.features.mfcc", lambda *a, **k: calls.append(1))
        second = source.features_for(record)  # served from cache, no recompute
        assert calls == []
        assert np.array_equal(first.values, second.values)
