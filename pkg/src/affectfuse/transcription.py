"""Pluggable speech-to-text boundary.

Backends are registered by id and resolved from configuration at startup.
The `transcribe` wrapper enforces the time budget (call runs in a worker
thread), retries retryable failures with exponential backoff, and records
latency. The mock backend echoes a fixture table for tests.
"""

from __future__ import annotations

import concurrent.futures
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

from .audio_io import AudioClip, wav_bytes
from .errors import AudioTooLong, BackendTimeout, BackendUnavailable, UnknownBackend

TOKEN_ENV_VAR = "TRANSCRIBE_TOKEN"


@dataclass(frozen=True)
class TranscriptionResult:
    text: str
    confidence: float | None
    latency_ms: float
    backend_id: str


class MockBackend:
    """Deterministic fixture-table backend: clip_id -> transcript.

    Unknown (or missing) clip ids yield empty text with confidence 0.
    """

    backend_id = "mock"
    max_clip_seconds: float | None = None

    def __init__(self, fixture: dict[str, str] | None = None):
        self.fixture = dict(fixture or {})

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        """Load a two-column (clip_id <TAB> transcript) fixture table."""
        fixture = {}
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if not line.strip():
                continue
            clip_id, _, transcript = line.partition("\t")
            fixture[clip_id.strip()] = transcript.strip()
        return cls(fixture)

    def transcribe_raw(self, clip: AudioClip, clip_id: str | None) -> tuple[str, float]:
        if clip_id is not None and clip_id in self.fixture:
            return self.fixture[clip_id], 1.0
        return "", 0.0


class HttpBackend:
    """POSTs WAV bytes to a configured endpoint, expects {"text", "confidence"}."""

    backend_id = "http"

    def __init__(
        self,
        endpoint: str,
        timeout_ms: float = 10_000,
        max_clip_seconds: float | None = None,
    ):
        self.endpoint = endpoint
        self.timeout_ms = timeout_ms
        self.max_clip_seconds = max_clip_seconds

    def transcribe_raw(self, clip: AudioClip, clip_id: str | None) -> tuple[str, float]:
        import httpx

        headers = {"Content-Type": "audio/wav"}
        token = os.environ.get(TOKEN_ENV_VAR)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        try:
            response = httpx.post(
                self.endpoint,
                content=wav_bytes(clip),
                headers=headers,
                timeout=self.timeout_ms / 1000.0,
            )
        except httpx.TimeoutException as exc:
            raise BackendTimeout(f"transcription endpoint timed out: {exc}") from exc
        except httpx.HTTPError as exc:
            raise BackendUnavailable(f"transcription endpoint unreachable: {exc}") from exc
        if response.status_code != 200:
            raise BackendUnavailable(
                f"transcription endpoint returned HTTP {response.status_code}"
            )
        payload = response.json()
        return str(payload.get("text", "")), payload.get("confidence")


def transcribe(
    backend,
    clip: AudioClip,
    clip_id: str | None = None,
    timeout_ms: float = 10_000,
    max_retries: int = 0,
    backoff_ms: float = 250.0,
) -> TranscriptionResult:
    """Run a backend with a hard time budget, retries, and latency tracking.

    Raises:
        AudioTooLong: clip exceeds the backend's duration limit.
        BackendTimeout / BackendUnavailable: after max_retries retries.
    """
    limit = getattr(backend, "max_clip_seconds", None)
    if limit is not None and clip.duration_seconds > limit:
        raise AudioTooLong(
            f"clip is {clip.duration_seconds:.2f}s, backend limit is {limit:.2f}s"
        )

    attempts = max_retries + 1
    last_error: Exception | None = None
    for attempt in range(attempts):
        executor = concurrent.futures.ThreadPoolExecutor(max_workers=1)
        started = time.perf_counter()
        future = executor.submit(backend.transcribe_raw, clip, clip_id)
        try:
            text, confidence = future.result(timeout=timeout_ms / 1000.0)
            latency_ms = (time.perf_counter() - started) * 1000.0
            executor.shutdown(wait=False)
            return TranscriptionResult(
                text=text,
                confidence=confidence,
                latency_ms=latency_ms,
                backend_id=getattr(backend, "backend_id", type(backend).__name__),
            )
        except concurrent.futures.TimeoutError:
            executor.shutdown(wait=False, cancel_futures=True)
            last_error = BackendTimeout(f"backend exceeded {timeout_ms:.0f} ms budget")
        except (BackendTimeout, BackendUnavailable) as exc:
            executor.shutdown(wait=False)
            last_error = exc
        except Exception:
            executor.shutdown(wait=False)
            raise
        if attempt < attempts - 1:
            time.sleep(backoff_ms / 1000.0 * (2**attempt))
    raise last_error


_BACKENDS: dict[str, Callable] = {}


def register_backend(backend_id: str, factory: Callable) -> None:
    """Register a backend factory(config) -> backend under a unique id."""
    if backend_id in _BACKENDS:
        raise ValueError(f"backend id {backend_id!r} is already registered")
    _BACKENDS[backend_id] = factory


def select_backend(config):
    """Instantiate the backend named by config.backend; fails at startup.

    Raises:
        UnknownBackend: config names an id that was never registered.
    """
    backend_id = config.backend
    factory = _BACKENDS.get(backend_id)
    if factory is None:
        raise UnknownBackend(
            f"transcription backend {backend_id!r} is not registered "
            f"(known: {sorted(_BACKENDS)})"
        )
    return factory(config)


def _mock_factory(config) -> MockBackend:
    fixture_path = getattr(config, "fixture_path", None)
    return MockBackend.from_file(fixture_path) if fixture_path else MockBackend()


def _http_factory(config) -> HttpBackend:
    endpoint = getattr(config, "endpoint", None)
    if not endpoint:
        raise UnknownBackend("http transcription backend requires transcription.endpoint")
    return HttpBackend(
        endpoint=endpoint,
        timeout_ms=getattr(config, "timeout_ms", 10_000),
        max_clip_seconds=getattr(config, "max_clip_seconds", None),
    )


register_backend("mock", _mock_factory)
register_backend("http", _http_factory)
