"""Application configuration: one JSON file, env overrides, strict validation.

Environment variables prefixed AFFECTFUSE_ override file values, with double
underscores separating nesting levels (AFFECTFUSE_SERVICE__PORT=9000 sets
service.port). Unknown keys are rejected and every validation problem is
reported at once, named by its exact key path.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Mapping

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .audio_models import AudioModelConfig
from .errors import ConfigInvalid
from .features import FeatureConfig
from .fusion import FusionConfig
from .text_model import TextModelConfig

ENV_PREFIX = "AFFECTFUSE_"


class PathsConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    corpora_roots: dict[str, str] = Field(default_factory=dict)
    artifact_dir: str = "artifacts"
    cache_dir: str = "cache"
    report_dir: str = "reports"
    audio_model_dir: str | None = None
    text_model_dir: str | None = None


class TranscriptionConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    backend: str | None = None
    timeout_ms: float = Field(default=10_000, gt=0)
    max_retries: int = Field(default=2, ge=0)
    backoff_ms: float = Field(default=250, ge=0)
    endpoint: str | None = None
    fixture_path: str | None = None
    max_clip_seconds: float | None = None


class ServiceConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    host: str = "127.0.0.1"
    port: int = Field(default=8000, ge=1, le=65535)
    max_upload_bytes: int = Field(default=10 * 1024 * 1024, gt=0)
    request_timeout_ms: float = Field(default=10_000, gt=0)
    max_concurrency: int = Field(default=4, ge=1)
    audio_only_fallback: bool = True


class AppConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    paths: PathsConfig = PathsConfig()
    feature: FeatureConfig = FeatureConfig()
    audio_model: AudioModelConfig = AudioModelConfig()
    text_model: TextModelConfig = TextModelConfig()
    fusion: FusionConfig = FusionConfig()
    transcription: TranscriptionConfig = TranscriptionConfig()
    service: ServiceConfig = ServiceConfig()


def _parse_env_value(raw: str):
    try:
        return json.loads(raw)
    except json.JSONDecodeError:
        return raw


def _deep_set(tree: dict, keys: list[str], value) -> None:
    node = tree
    for key in keys[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[keys[-1]] = value


def _env_overrides(env: Mapping[str, str]) -> dict:
    tree: dict = {}
    for name in sorted(env):
        if not name.startswith(ENV_PREFIX):
            continue
        keys = [part.lower() for part in name[len(ENV_PREFIX):].split("__") if part]
        if keys:
            _deep_set(tree, keys, _parse_env_value(env[name]))
    return tree


def _deep_merge(base: dict, override: dict) -> dict:
    merged = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _deep_merge(merged[key], value)
        else:
            merged[key] = value
    return merged


def load_config(path: str | Path | None = None, env: Mapping[str, str] | None = None) -> AppConfig:
    """Load the JSON config file (empty/missing -> defaults) with env overrides.

    Raises:
        ConfigInvalid: aggregated list of every bad key, named by path.
    """
    data: dict = {}
    if path is not None:
        try:
            content = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigInvalid([f"{path}: cannot read config file ({exc})"]) from exc
        if content.strip():
            try:
                data = json.loads(content)
            except json.JSONDecodeError as exc:
                raise ConfigInvalid([f"{path}: not valid JSON ({exc})"]) from exc
            if not isinstance(data, dict):
                raise ConfigInvalid([f"{path}: top level must be a JSON object"])

    overrides = _env_overrides(os.environ if env is None else env)
    if overrides:
        data = _deep_merge(data, overrides)

    try:
        return AppConfig(**data)
    except ValidationError as exc:
        problems = []
        for err in exc.errors():
            key_path = ".".join(str(part) for part in err["loc"])
            problems.append(f"{key_path}: {err['msg']}")
        raise ConfigInvalid(problems) from exc
