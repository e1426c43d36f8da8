"""PCM WAV decoding, duration normalization, and a small writer for fixtures.

The decoder handles 8/16/24/32-bit integer and 32-bit float PCM, mixes
channels down by arithmetic mean, and resamples with a polyphase
(band-limited) filter.
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np
from scipy.signal import resample_poly

from .errors import CorruptFile, UnsupportedEncoding

_FORMAT_PCM = 1
_FORMAT_IEEE_FLOAT = 3
_FORMAT_EXTENSIBLE = 0xFFFE


@dataclass
class AudioClip:
    """Mono waveform with sample rate; samples are float64 in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    @property
    def duration_seconds(self) -> float:
        return len(self.samples) / self.sample_rate

    def copy(self) -> "AudioClip":
        return AudioClip(self.samples.copy(), self.sample_rate)


def _read_chunks(data: bytes) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise CorruptFile("not a RIFF/WAVE file")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        cid = data[pos:pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8:pos + 8 + size]
        if cid in (b"fmt ", b"data") and len(body) < size:
            raise CorruptFile(f"truncated {cid.decode(errors='replace').strip()} chunk")
        chunks.setdefault(cid, body)
        pos += 8 + size + (size & 1)
    return chunks


def _decode_samples(raw: bytes, fmt: int, bits: int) -> np.ndarray:
    if fmt == _FORMAT_IEEE_FLOAT:
        if bits != 32:
            raise UnsupportedEncoding(f"{bits}-bit float WAV not supported")
        return np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if fmt != _FORMAT_PCM:
        raise UnsupportedEncoding(f"WAV format code {fmt} not supported")
    if bits == 8:
        return (np.frombuffer(raw, dtype=np.uint8).astype(np.float64) - 128.0) / 128.0
    if bits == 16:
        return np.frombuffer(raw, dtype="<i2").astype(np.float64) / 32768.0
    if bits == 24:
        b = np.frombuffer(raw, dtype=np.uint8)
        n = len(b) // 3
        b = b[: n * 3].reshape(n, 3)
        val = (
            b[:, 0].astype(np.int32)
            | (b[:, 1].astype(np.int32) << 8)
            | (b[:, 2].astype(np.int32) << 16)
        )
        val = np.where(val >= 1 << 23, val - (1 << 24), val)
        return val.astype(np.float64) / float(1 << 23)
    if bits == 32:
        return np.frombuffer(raw, dtype="<i4").astype(np.float64) / float(1 << 31)
    raise UnsupportedEncoding(f"{bits}-bit integer WAV not supported")


def load_wav(source: str | Path | io.BytesIO | bytes, target_sample_rate: int | None = None) -> AudioClip:
    """Decode a PCM WAV file into a mono clip, optionally resampled.

    Channels are mixed down by arithmetic mean; integer samples are scaled by
    the full negative range (so int16 -32768 becomes exactly -1.0). When
    `target_sample_rate` differs from the file rate, the signal is resampled
    by band-limited polyphase interpolation.

    Raises:
        CorruptFile: structurally invalid or truncated file.
        UnsupportedEncoding: sample format outside the supported set.
    """
    if isinstance(source, (str, Path)):
        data = Path(source).read_bytes()
    elif isinstance(source, bytes):
        data = source
    else:
        data = source.read()

    chunks = _read_chunks(data)
    if b"fmt " not in chunks or b"data" not in chunks:
        raise CorruptFile("missing fmt or data chunk")
    fmt_body = chunks[b"fmt "]
    if len(fmt_body) < 16:
        raise CorruptFile("fmt chunk too small")
    fmt, n_channels, sample_rate, _, _, bits = struct.unpack_from("<HHIIHH", fmt_body, 0)
    if fmt == _FORMAT_EXTENSIBLE:
        if len(fmt_body) < 26:
            raise CorruptFile("extensible fmt chunk too small")
        (fmt,) = struct.unpack_from("<H", fmt_body, 24)
    if n_channels < 1 or sample_rate < 1:
        raise CorruptFile(f"invalid channel count {n_channels} or rate {sample_rate}")

    flat = _decode_samples(chunks[b"data"], fmt, bits)
    n_frames = len(flat) // n_channels
    samples = flat[: n_frames * n_channels].reshape(n_frames, n_channels).mean(axis=1)

    if target_sample_rate is not None and target_sample_rate != sample_rate:
        ratio = Fraction(int(target_sample_rate), int(sample_rate))
        samples = resample_poly(samples, ratio.numerator, ratio.denominator)
        sample_rate = int(target_sample_rate)

    return AudioClip(np.ascontiguousarray(samples, dtype=np.float64), int(sample_rate))


def save_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as 16-bit PCM mono WAV (test fixtures and HTTP payloads)."""
    Path(path).write_bytes(wav_bytes(clip))


def wav_bytes(clip: AudioClip) -> bytes:
    """Serialize a clip to an in-memory 16-bit PCM mono WAV."""
    pcm = np.clip(np.round(clip.samples * 32767.0), -32768, 32767).astype("<i2").tobytes()
    header = struct.pack(
        "<4sI4s4sIHHIIHH4sI",
        b"RIFF", 36 + len(pcm), b"WAVE",
        b"fmt ", 16, _FORMAT_PCM, 1, clip.sample_rate,
        clip.sample_rate * 2, 2, 16,
        b"data", len(pcm),
    )
    return header + pcm


def pad_or_truncate(clip: AudioClip, clip_seconds: float) -> AudioClip:
    """Normalize duration: end-pad short clips with zeros, center-crop long ones."""
    target = round(clip_seconds * clip.sample_rate)
    n = len(clip.samples)
    if n == target:
        return clip
    if n < target:
        out = np.zeros(target, dtype=np.float64)
        out[:n] = clip.samples
    else:
        start = (n - target) // 2
        out = clip.samples[start:start + target].copy()
    return AudioClip(out, clip.sample_rate)
