"""HTTP scoring service: real-time fused prediction over preloaded models.

Models are loaded once into an immutable runtime; request handling never
mutates them. Prediction work runs in a bounded worker pool and every
request is answered within the configured budget or aborted with 504.
"""

from __future__ import annotations

import concurrent.futures
import hashlib
import io
import logging
import uuid
from pathlib import Path

from fastapi import FastAPI, File, Form, Request, UploadFile
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .audio_io import load_wav
from .audio_models import load_model as load_audio_model
from .config import AppConfig
from .errors import (
    AffectFuseError,
    AudioTooLong,
    BackendTimeout,
    BackendUnavailable,
    ClipTooShort,
    CorruptFile,
    UnsupportedEncoding,
)
from .pipeline import FusedPipeline
from .text_model import load_text_model
from .taxonomy import CANONICAL_LABELS
from .transcription import select_backend

logger = logging.getLogger("affectfuse.service")


class PredictResponse(BaseModel):
    label: str
    probs: dict[str, float]
    modalities_used: list[str]
    transcript: str | None = None
    timing_ms: dict[str, float]
    model_versions: dict[str, str]
    degraded: bool = False


def _file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()[:12]


class ModelRuntime:
    """Loads model artifacts and owns the shared, immutable pipeline."""

    def __init__(self, config: AppConfig):
        self.config = config
        self.pipeline: FusedPipeline | None = None
        self.model_versions: dict[str, str] = {}

    @property
    def loaded(self) -> bool:
        return self.pipeline is not None

    def _audio_dir(self) -> Path:
        paths = self.config.paths
        return Path(paths.audio_model_dir or Path(paths.artifact_dir) / "audio")

    def _text_dir(self) -> Path:
        paths = self.config.paths
        return Path(paths.text_model_dir or Path(paths.artifact_dir) / "text")

    def load(self) -> None:
        """Load artifacts and build the pipeline; raises on a bad audio model.

        A missing text model degrades to audio-only service rather than
        failing startup.
        """
        audio_dir = self._audio_dir()
        audio_model = load_audio_model(audio_dir)
        versions = {"audio": f"{audio_model.cfg.kind}:{_file_digest(audio_dir / 'weights.pt')}"}

        text_model = None
        text_dir = self._text_dir()
        if (text_dir / "metadata.json").exists():
            text_model = load_text_model(text_dir)
            versions["text"] = text_model.cfg.pretrained_id

        backend = None
        if self.config.transcription.backend:
            backend = select_backend(self.config.transcription)

        self.pipeline = FusedPipeline(
            feature_cfg=self.config.feature,
            audio_model=audio_model,
            text_model=text_model,
            backend=backend,
            fusion_cfg=self.config.fusion,
            transcription_timeout_ms=self.config.transcription.timeout_ms,
            transcription_max_retries=self.config.transcription.max_retries,
            transcription_backoff_ms=self.config.transcription.backoff_ms,
            audio_only_fallback=self.config.service.audio_only_fallback,
        )
        self.model_versions = versions


def _error(status: int, message: str) -> JSONResponse:
    return JSONResponse(status_code=status, content={"error": message})


def create_app(runtime: ModelRuntime) -> FastAPI:
    app = FastAPI(title="affectfuse", version="0.1.0")
    service_cfg = runtime.config.service
    executor = concurrent.futures.ThreadPoolExecutor(max_workers=service_cfg.max_concurrency)

    @app.get("/v1/health")
    def health():
        if not runtime.loaded:
            return _error(503, "models not loaded")
        return {"status": "ok", "model_versions": runtime.model_versions}

    @app.get("/v1/labels")
    def labels():
        return {"labels": list(CANONICAL_LABELS)}

    @app.post("/v1/predict")
    def predict(
        request: Request,
        audio: UploadFile = File(...),
        transcript: str | None = Form(None),
    ):
        if not runtime.loaded:
            return _error(503, "models not loaded")

        length = request.headers.get("content-length")
        if length and int(length) > service_cfg.max_upload_bytes + 4096:
            return _error(413, f"upload exceeds {service_cfg.max_upload_bytes} bytes")
        payload = audio.file.read(service_cfg.max_upload_bytes + 1)
        if len(payload) > service_cfg.max_upload_bytes:
            return _error(413, f"upload exceeds {service_cfg.max_upload_bytes} bytes")

        try:
            clip = load_wav(io.BytesIO(payload), runtime.config.feature.target_sample_rate)
        except (CorruptFile, UnsupportedEncoding) as exc:
            return _error(400, str(exc))
        if len(clip.samples) == 0:
            return _error(422, "audio contains no samples")
        if runtime.config.feature.clip_samples < runtime.config.feature.frame_length:
            return _error(422, "configured clip length is shorter than one analysis frame")

        clip_id = Path(audio.filename).stem if audio.filename else None
        future = executor.submit(
            runtime.pipeline.predict_clip, clip, transcript=transcript, clip_id=clip_id
        )
        try:
            result = future.result(timeout=service_cfg.request_timeout_ms / 1000.0)
        except concurrent.futures.TimeoutError:
            future.cancel()
            return _error(504, f"request exceeded {service_cfg.request_timeout_ms:.0f} ms")
        except ClipTooShort as exc:
            return _error(422, str(exc))
        except (BackendTimeout, BackendUnavailable, AudioTooLong) as exc:
            return _error(503, f"transcription unavailable and audio-only fallback disabled: {exc}")
        except AffectFuseError as exc:
            return _error(400, str(exc))
        except Exception:
            error_id = uuid.uuid4().hex[:12]
            logger.exception("internal error %s while serving /v1/predict", error_id)
            return _error(500, f"internal error (id {error_id})")

        fused = result.prediction
        response = PredictResponse(
            label=fused.label.label,
            probs=fused.distribution.as_dict(),
            modalities_used=sorted(fused.modalities_used),
            transcript=result.transcript,
            timing_ms={k: round(v, 3) for k, v in result.timings_ms.items()},
            model_versions=runtime.model_versions,
            degraded=result.degraded,
        )
        return JSONResponse(content=response.model_dump(exclude_none=True))

    return app


def serve(config: AppConfig) -> None:
    """Load models and run the service (blocking)."""
    import uvicorn

    runtime = ModelRuntime(config)
    runtime.load()
    app = create_app(runtime)
    uvicorn.run(app, host=config.service.host, port=config.service.port, log_level="info")
