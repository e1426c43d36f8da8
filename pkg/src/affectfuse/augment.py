"""Waveform augmentation: SNR-scaled noise, pitch shift, time stretch.

All transforms are deterministic given the spec seed. Pitch shift and time
stretch use an internal phase vocoder so no external DSP dependency is
needed; augmentation fidelity, not studio quality, is the bar.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.signal import resample_poly

from .audio_io import AudioClip, pad_or_truncate
from .errors import SilentClip

KINDS = ("additive_noise", "pitch_shift", "time_stretch")

_VOC_NFFT = 2048
_VOC_HOP = 512


@dataclass(frozen=True)
class AugmentSpec:
    """kind + parameter (SNR dB / semitones / rate factor) + RNG seed."""

    kind: str
    param: float
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown augmentation kind {self.kind!r}; expected one of {KINDS}")
        if not np.isfinite(self.param):
            raise ValueError("augmentation parameter must be finite")
        if self.kind == "time_stretch" and self.param <= 0:
            raise ValueError("time_stretch rate must be positive")


def _add_noise_at_snr(samples: np.ndarray, snr_db: float, seed: int) -> np.ndarray:
    signal_power = float(np.mean(samples**2))
    if signal_power == 0.0:
        raise SilentClip("zero-power signal: SNR-scaled noise is undefined")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(len(samples))
    target_noise_power = signal_power / (10.0 ** (snr_db / 10.0))
    noise *= np.sqrt(target_noise_power / np.mean(noise**2))
    return samples + noise


def _phase_vocoder(spec: np.ndarray, rate: float) -> np.ndarray:
    """Stretch an STFT (bins x frames) along time by 1/rate, preserving pitch."""
    n_bins, n_frames = spec.shape
    time_steps = np.arange(0, n_frames, rate)
    expected_advance = np.linspace(0, np.pi * _VOC_HOP, n_bins)

    padded = np.concatenate([spec, np.zeros((n_bins, 1), dtype=spec.dtype)], axis=1)
    out = np.empty((n_bins, len(time_steps)), dtype=np.complex128)
    phase = np.angle(padded[:, 0])
    for t, step in enumerate(time_steps):
        i = int(step)
        frac = step - i
        mag = (1.0 - frac) * np.abs(padded[:, i]) + frac * np.abs(padded[:, i + 1])
        out[:, t] = mag * np.exp(1j * phase)
        delta = np.angle(padded[:, i + 1]) - np.angle(padded[:, i]) - expected_advance
        delta -= 2.0 * np.pi * np.round(delta / (2.0 * np.pi))
        phase += expected_advance + delta
    return out


def _stretch_waveform(samples: np.ndarray, rate: float) -> np.ndarray:
    """Time-stretch: output duration ~= input / rate (rate > 1 speeds up)."""
    n = len(samples)
    if n < _VOC_NFFT + _VOC_HOP:
        # Too short for vocoder frames; fall back to plain resampling.
        ratio = Fraction(1.0 / rate).limit_denominator(1000)
        return resample_poly(samples, ratio.numerator, ratio.denominator)
    window = np.hanning(_VOC_NFFT)
    frames = np.lib.stride_tricks.sliding_window_view(samples, _VOC_NFFT)[::_VOC_HOP]
    spec = np.fft.rfft(frames * window, axis=1).T
    stretched = _phase_vocoder(spec, rate)

    frames_out = np.fft.irfft(stretched.T, n=_VOC_NFFT, axis=1) * window
    n_out_frames = frames_out.shape[0]
    out_len = _VOC_NFFT + _VOC_HOP * (n_out_frames - 1)
    out = np.zeros(out_len)
    norm = np.zeros(out_len)
    win_sq = window**2
    for t in range(n_out_frames):
        start = t * _VOC_HOP
        out[start:start + _VOC_NFFT] += frames_out[t]
        norm[start:start + _VOC_NFFT] += win_sq
    out[norm > 1e-10] /= norm[norm > 1e-10]
    target_len = round(n / rate)
    if len(out) < target_len:
        out = np.pad(out, (0, target_len - len(out)))
    return out[:target_len]


def _pitch_shift(samples: np.ndarray, semitones: float, sample_rate: int) -> np.ndarray:
    factor = 2.0 ** (semitones / 12.0)
    stretched = _stretch_waveform(samples, 1.0 / factor)
    ratio = Fraction(1.0 / factor).limit_denominator(1000)
    shifted = resample_poly(stretched, ratio.numerator, ratio.denominator)
    n = len(samples)
    if len(shifted) < n:
        shifted = np.pad(shifted, (0, n - len(shifted)))
    return shifted[:n]


def augment(clip: AudioClip, spec: AugmentSpec) -> AudioClip:
    """Apply one augmentation; deterministic for a given (clip, spec).

    additive_noise adds white Gaussian noise scaled to the target SNR in dB;
    pitch_shift moves the signal by `param` semitones preserving duration;
    time_stretch changes duration by factor 1/param, then restores the input
    duration via pad/center-crop.

    Raises:
        SilentClip: additive_noise on a zero-power signal.
    """
    duration = clip.duration_seconds
    if spec.kind == "additive_noise":
        out = _add_noise_at_snr(clip.samples, spec.param, spec.seed)
        return AudioClip(out, clip.sample_rate)
    if spec.kind == "pitch_shift":
        if spec.param == 0.0:
            return pad_or_truncate(clip.copy(), duration)
        out = _pitch_shift(clip.samples, spec.param, clip.sample_rate)
        return pad_or_truncate(AudioClip(out, clip.sample_rate), duration)
    # time_stretch
    if spec.param == 1.0:
        return pad_or_truncate(clip.copy(), duration)
    out = _stretch_waveform(clip.samples, spec.param)
    return pad_or_truncate(AudioClip(out, clip.sample_rate), duration)
