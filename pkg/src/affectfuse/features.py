"""MFCC feature extraction: STFT -> mel filterbank -> log -> orthonormal DCT-II.

Conventions pinned here (and relied on by the tests):
  * symmetric Hann analysis window, frames zero-padded to n_fft, no centering
    (the first frame starts at sample 0);
  * natural log of mel energies with an additive floor;
  * triangular mel filters with peaks equally spaced on the mel scale,
    each row normalized to sum to 1;
  * orthonormal DCT-II along the coefficient axis, truncated to n_mfcc.
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import scipy.fft
from pydantic import BaseModel, ConfigDict, model_validator

from .audio_io import AudioClip, load_wav, pad_or_truncate
from .errors import ClipTooShort, EmptyMatrix, InvalidBand


class FeatureConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    target_sample_rate: int = 22050
    clip_seconds: float = 3.0
    frame_length: int = 2048
    hop_length: int = 512
    n_fft: int = 2048
    n_mels: int = 128
    n_mfcc: int = 40
    fmin: float = 0.0
    fmax: float = 11025.0
    log_floor: float = 1e-10

    @model_validator(mode="after")
    def _check(self) -> "FeatureConfig":
        if self.target_sample_rate <= 0 or self.clip_seconds <= 0:
            raise ValueError("target_sample_rate and clip_seconds must be positive")
        if self.frame_length <= 0 or self.hop_length <= 0:
            raise ValueError("frame_length and hop_length must be positive")
        if self.n_mfcc > self.n_mels:
            raise ValueError(f"n_mfcc ({self.n_mfcc}) must be <= n_mels ({self.n_mels})")
        if self.frame_length > self.n_fft:
            raise ValueError(f"frame_length ({self.frame_length}) must be <= n_fft ({self.n_fft})")
        if not (self.fmin < self.fmax <= self.target_sample_rate / 2):
            raise ValueError(
                f"need fmin < fmax <= rate/2, got fmin={self.fmin}, fmax={self.fmax}, "
                f"rate={self.target_sample_rate}"
            )
        if self.log_floor <= 0:
            raise ValueError("log_floor must be positive")
        return self

    @property
    def clip_samples(self) -> int:
        return round(self.clip_seconds * self.target_sample_rate)

    @property
    def n_frames(self) -> int:
        """Frame count for a duration-normalized clip (no centering)."""
        return 1 + (self.clip_samples - self.frame_length) // self.hop_length

    @property
    def n_bins(self) -> int:
        return self.n_fft // 2 + 1

    def config_hash(self) -> str:
        payload = json.dumps(self.model_dump(), sort_keys=True)
        return hashlib.sha256(payload.encode()).hexdigest()


@dataclass(eq=False)
class MfccMatrix:
    """T x n_mfcc feature matrix plus the hash of the config that produced it."""

    values: np.ndarray
    config_hash: str

    @property
    def n_frames(self) -> int:
        return self.values.shape[0]


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def _frame_signal(x: np.ndarray, frame_length: int, hop_length: int) -> np.ndarray:
    if len(x) < frame_length:
        raise ClipTooShort(f"clip has {len(x)} samples, need at least {frame_length}")
    windows = np.lib.stride_tricks.sliding_window_view(x, frame_length)
    return windows[::hop_length]


def stft_magnitude(clip: AudioClip, cfg: FeatureConfig) -> np.ndarray:
    """Magnitude spectrogram, shape (T, n_fft//2 + 1).

    Hann-windowed frames of `frame_length` samples at `hop_length` stride,
    zero-padded to `n_fft`; no centering, so frame t starts at sample
    t * hop_length.

    Raises:
        ClipTooShort: fewer samples than one frame.
    """
    frames = _frame_signal(clip.samples, cfg.frame_length, cfg.hop_length)
    window = np.hanning(cfg.frame_length)
    return np.abs(np.fft.rfft(frames * window, n=cfg.n_fft, axis=1))


def mel_filterbank(cfg: FeatureConfig) -> np.ndarray:
    """Triangular mel filterbank, shape (n_mels, n_fft//2 + 1).

    Peaks sit at n_mels points equally spaced on the mel scale between fmin
    and fmax; every row is normalized to sum to 1.

    Raises:
        InvalidBand: fmin >= fmax, or a filter with no spectral support at
            this FFT resolution.
    """
    if cfg.fmin >= cfg.fmax:
        raise InvalidBand(f"fmin ({cfg.fmin}) must be < fmax ({cfg.fmax})")
    mel_points = np.linspace(hz_to_mel(cfg.fmin), hz_to_mel(cfg.fmax), cfg.n_mels + 2)
    hz_points = mel_to_hz(mel_points)
    bin_freqs = np.arange(cfg.n_bins) * cfg.target_sample_rate / cfg.n_fft

    left = hz_points[:-2, None]
    center = hz_points[1:-1, None]
    right = hz_points[2:, None]
    up = (bin_freqs[None, :] - left) / (center - left)
    down = (right - bin_freqs[None, :]) / (right - center)
    fb = np.maximum(0.0, np.minimum(up, down))

    row_sums = fb.sum(axis=1)
    empty = np.nonzero(row_sums == 0)[0]
    if empty.size:
        raise InvalidBand(
            f"filter {empty[0]} has no spectral support; band [{cfg.fmin}, {cfg.fmax}] Hz "
            f"is too narrow for n_fft={cfg.n_fft} at {cfg.target_sample_rate} Hz"
        )
    return fb / row_sums[:, None]


def dct_matrix(n: int) -> np.ndarray:
    """Orthonormal DCT-II matrix D (n x n) with D @ D.T = I."""
    k = np.arange(n)[:, None]
    j = np.arange(n)[None, :]
    d = np.sqrt(2.0 / n) * np.cos(np.pi * k * (2 * j + 1) / (2 * n))
    d[0] /= np.sqrt(2.0)
    return d


_FILTERBANK_CACHE: dict[str, np.ndarray] = {}


def _cached_filterbank(cfg: FeatureConfig) -> np.ndarray:
    key = cfg.config_hash()
    fb = _FILTERBANK_CACHE.get(key)
    if fb is None:
        fb = mel_filterbank(cfg)
        fb.setflags(write=False)
        _FILTERBANK_CACHE[key] = fb
    return fb


def mfcc(clip: AudioClip, cfg: FeatureConfig) -> MfccMatrix:
    """Mel-frequency cepstral coefficients for a duration-normalized clip.

    Per frame: power spectrum -> mel filterbank -> log(. + log_floor) ->
    orthonormal DCT-II truncated to n_mfcc coefficients.

    Raises:
        ClipTooShort: propagated from the STFT.
    """
    power = stft_magnitude(clip, cfg) ** 2
    mel_energy = power @ _cached_filterbank(cfg).T
    log_mel = np.log(mel_energy + cfg.log_floor)
    coeffs = scipy.fft.dct(log_mel, type=2, norm="ortho", axis=1)[:, : cfg.n_mfcc]
    return MfccMatrix(values=coeffs, config_hash=cfg.config_hash())


def aggregate_mean(m: MfccMatrix) -> np.ndarray:
    """Arithmetic mean over the time axis, shape (n_mfcc,)."""
    if m.values.shape[0] < 1:
        raise EmptyMatrix("cannot aggregate a matrix with zero frames")
    return m.values.mean(axis=0)


class FeatureCache:
    """One .npz file per clip_id; a hit requires config-hash equality."""

    def __init__(self, cache_dir: str | Path):
        self.cache_dir = Path(cache_dir)
        self.cache_dir.mkdir(parents=True, exist_ok=True)

    def _path(self, clip_id: str) -> Path:
        safe = re.sub(r"[^A-Za-z0-9._-]", "_", clip_id)
        digest = hashlib.sha1(clip_id.encode()).hexdigest()[:8]
        return self.cache_dir / f"{safe}-{digest}.npz"

    def get(self, clip_id: str, config_hash: str) -> MfccMatrix | None:
        path = self._path(clip_id)
        if not path.exists():
            return None
        try:
            with np.load(path) as data:
                if str(data["config_hash"]) != config_hash:
                    return None
                return MfccMatrix(values=data["values"], config_hash=config_hash)
        except (OSError, ValueError, KeyError):
            return None

    def put(self, clip_id: str, matrix: MfccMatrix) -> None:
        np.savez(self._path(clip_id), values=matrix.values, config_hash=matrix.config_hash)


class ManifestFeatureSource:
    """Computes (and optionally caches) MFCC matrices for manifest records."""

    def __init__(self, cfg: FeatureConfig, cache: FeatureCache | None = None):
        self.cfg = cfg
        self.cache = cache
        self._hash = cfg.config_hash()

    @property
    def config_hash(self) -> str:
        return self._hash

    def load_clip(self, record) -> AudioClip:
        clip = load_wav(record.source_path, self.cfg.target_sample_rate)
        return pad_or_truncate(clip, self.cfg.clip_seconds)

    def features_for(self, record) -> MfccMatrix:
        if self.cache is not None:
            hit = self.cache.get(record.clip_id, self._hash)
            if hit is not None:
                return hit
        matrix = mfcc(self.load_clip(record), self.cfg)
        if self.cache is not None:
            self.cache.put(record.clip_id, matrix)
        return matrix

    def __call__(self, record) -> MfccMatrix:
        return self.features_for(record)
