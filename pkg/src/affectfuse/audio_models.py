"""Acoustic emotion classifiers: a 1-D CNN and a stacked LSTM over MFCCs.

Both models emit logits over the 8 canonical classes; `predict` converts to
a probability distribution. Training minimizes cross-entropy with Adam and
keeps the best-validation-accuracy parameters.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Literal

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F
from pydantic import BaseModel, ConfigDict, model_validator

from .errors import (
    ArtifactMismatch,
    CorruptArtifact,
    EmptySplit,
    NonFiniteLoss,
    ShapeError,
    ShapeMismatch,
)
from .features import FeatureConfig, MfccMatrix, aggregate_mean
from .manifest import DatasetManifest
from .taxonomy import CANONICAL_LABELS, EmotionDistribution, N_CLASSES
from .training import EpochMetrics, TrainReport

ARTIFACT_SCHEMA_VERSION = "1"
METADATA_FILE = "metadata.json"
WEIGHTS_FILE = "weights.pt"


class AudioModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: Literal["cnn", "lstm"] = "cnn"
    input_frames: int | None = None
    input_coeffs: int | None = None
    conv_blocks: list[tuple[int, int, int]] = [(64, 5, 2), (128, 5, 2), (256, 5, 2)]
    lstm_units: list[int] = [128, 64]
    dense_width: int = 128
    dropout: float = 0.2
    n_classes: int = 8
    input_mode: Literal["frames", "aggregate"] = "frames"

    @model_validator(mode="after")
    def _check(self) -> "AudioModelConfig":
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}, got {self.n_classes}")
        if not self.conv_blocks:
            raise ValueError("need at least one conv block")
        if not self.lstm_units:
            raise ValueError("need at least one LSTM layer")
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.kind == "lstm" and self.input_mode == "aggregate":
            raise ValueError("aggregate input mode is CNN-only")
        return self

    def resolved(self, feature_cfg: FeatureConfig) -> "AudioModelConfig":
        """Fill input dimensions from a feature config where unset."""
        return self.model_copy(
            update={
                "input_frames": self.input_frames or feature_cfg.n_frames,
                "input_coeffs": self.input_coeffs or feature_cfg.n_mfcc,
            }
        )


@dataclass
class TrainHyper:
    epochs: int = 50
    batch_size: int = 32
    learning_rate: float = 1e-3
    seed: int = 42
    early_stop_patience: int | None = None

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


class _CnnNet(nn.Module):
    def __init__(self, cfg: AudioModelConfig):
        super().__init__()
        in_channels = cfg.input_coeffs if cfg.input_mode == "frames" else 1
        blocks = []
        for filters, kernel, pool in cfg.conv_blocks:
            blocks += [
                nn.Conv1d(in_channels, filters, kernel, padding=kernel // 2),
                nn.BatchNorm1d(filters),
                nn.ReLU(),
                nn.MaxPool1d(pool),
                nn.Dropout(cfg.dropout),
            ]
            in_channels = filters
        self.blocks = nn.Sequential(*blocks)
        self.head = nn.Sequential(
            nn.Linear(in_channels, cfg.dense_width),
            nn.ReLU(),
            nn.Dropout(cfg.dropout),
            nn.Linear(cfg.dense_width, cfg.n_classes),
        )
        self.input_mode = cfg.input_mode

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.input_mode == "frames":
            h = x.transpose(1, 2)  # (B, T, C) -> (B, C, T)
        else:
            h = x.unsqueeze(1)  # (B, C) -> (B, 1, C)
        h = self.blocks(h).mean(dim=2)
        return self.head(h)


class _LstmNet(nn.Module):
    def __init__(self, cfg: AudioModelConfig):
        super().__init__()
        layers = []
        in_size = cfg.input_coeffs
        for units in cfg.lstm_units:
            layers.append(nn.LSTM(in_size, units, batch_first=True))
            in_size = units
        self.layers = nn.ModuleList(layers)
        self.dropout = nn.Dropout(cfg.dropout)
        self.head = nn.Linear(in_size, cfg.n_classes)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        h = x
        for i, layer in enumerate(self.layers):
            h, _ = layer(h)
            if i < len(self.layers) - 1:
                h = self.dropout(h)
        return self.head(h[:, -1])


@dataclass
class AudioModel:
    net: nn.Module
    cfg: AudioModelConfig
    feature_config_hash: str | None = None


def _time_axis_after_pools(cfg: AudioModelConfig) -> int:
    length = cfg.input_frames if cfg.input_mode == "frames" else cfg.input_coeffs
    for _, _, pool in cfg.conv_blocks:
        length //= pool
    return length


def build_model(cfg: AudioModelConfig, seed: int, dtype: torch.dtype = torch.float32) -> AudioModel:
    """Construct a model with deterministic, seed-controlled initialization.

    Raises:
        ShapeError: pooling would reduce the time axis below one step.
    """
    if cfg.input_frames is None or cfg.input_coeffs is None:
        raise ValueError("config must be resolved against a feature config first")
    if cfg.kind == "cnn" and _time_axis_after_pools(cfg) < 1:
        raise ShapeError(
            f"pooling schedule {[b[2] for b in cfg.conv_blocks]} reduces the time axis "
            f"of {cfg.input_frames if cfg.input_mode == 'frames' else cfg.input_coeffs} below 1"
        )
    torch.manual_seed(seed)
    net = _CnnNet(cfg) if cfg.kind == "cnn" else _LstmNet(cfg)
    net.to(dtype)
    net.eval()
    return AudioModel(net=net, cfg=cfg)


def _input_array(model: AudioModel, features: MfccMatrix | np.ndarray) -> np.ndarray:
    cfg = model.cfg
    if isinstance(features, MfccMatrix):
        if model.feature_config_hash is not None and features.config_hash != model.feature_config_hash:
            raise ArtifactMismatch(
                f"features built with config {features.config_hash[:12]}..., model expects "
                f"{model.feature_config_hash[:12]}..."
            )
        arr = aggregate_mean(features) if cfg.input_mode == "aggregate" else features.values
    else:
        arr = np.asarray(features, dtype=np.float64)
    if cfg.input_mode == "frames":
        expected = (cfg.input_frames, cfg.input_coeffs)
    else:
        expected = (cfg.input_coeffs,)
    if arr.shape != expected:
        raise ShapeMismatch(f"feature shape {arr.shape} does not match model input {expected}")
    return arr


def predict(model: AudioModel, features: MfccMatrix | np.ndarray) -> EmotionDistribution:
    """Softmax class distribution for one clip's features.

    Raises:
        ShapeMismatch: feature shape does not match the model config.
        ArtifactMismatch: features carry a different FeatureConfig hash.
    """
    arr = _input_array(model, features)
    dtype = next(model.net.parameters()).dtype
    x = torch.as_tensor(arr, dtype=dtype).unsqueeze(0)
    model.net.eval()
    with torch.no_grad():
        probs = F.softmax(model.net(x), dim=1).squeeze(0).to(torch.float64).numpy()
    return EmotionDistribution.from_probs(probs / probs.sum())


def predict_batch(model: AudioModel, batch: np.ndarray) -> np.ndarray:
    """Softmax probabilities for a stacked feature batch (N, ...)."""
    dtype = next(model.net.parameters()).dtype
    x = torch.as_tensor(batch, dtype=dtype)
    model.net.eval()
    with torch.no_grad():
        return F.softmax(model.net(x), dim=1).to(torch.float64).numpy()


def _stack_features(model: AudioModel, records, feature_source) -> tuple[np.ndarray, np.ndarray]:
    xs = [_input_array(model, feature_source(r)) for r in records]
    ys = [int(r.label) for r in records]
    return np.stack(xs).astype(np.float32), np.asarray(ys, dtype=np.int64)


def train(
    model: AudioModel,
    manifest: DatasetManifest,
    feature_source,
    hyper: TrainHyper,
) -> TrainReport:
    """Train on the manifest's train split, validating per epoch.

    Minimizes categorical cross-entropy with Adam over seeded shuffles of the
    train split; the best-validation-accuracy parameters (ties to the earlier
    epoch) are restored into `model` on return.

    Raises:
        EmptySplit: no audio records in train or val.
        NonFiniteLoss: loss became NaN/inf (diagnostic includes the batch).
    """
    train_records = manifest.audio_records("train")
    val_records = manifest.audio_records("val")
    if not train_records:
        raise EmptySplit("manifest has no audio records in the train split")
    if not val_records:
        raise EmptySplit("manifest has no audio records in the val split")

    started = time.perf_counter()
    x_train, y_train = _stack_features(model, train_records, feature_source)
    x_val, y_val = _stack_features(model, val_records, feature_source)

    torch.manual_seed(hyper.seed)
    rng = np.random.default_rng(hyper.seed)
    dtype = next(model.net.parameters()).dtype
    xt = torch.as_tensor(x_train, dtype=dtype)
    yt = torch.as_tensor(y_train)
    optimizer = torch.optim.Adam(model.net.parameters(), lr=hyper.learning_rate)

    report = TrainReport(
        model_config=model.cfg.model_dump(),
        hyper=dataclasses.asdict(hyper),
    )
    best_state = copy.deepcopy(model.net.state_dict())
    best_val = -1.0
    best_epoch = 0
    epochs_since_best = 0

    for epoch in range(1, hyper.epochs + 1):
        model.net.train()
        perm = rng.permutation(len(train_records))
        total_loss = 0.0
        total_correct = 0
        for start in range(0, len(perm), hyper.batch_size):
            idx = perm[start:start + hyper.batch_size]
            xb, yb = xt[idx], yt[idx]
            optimizer.zero_grad()
            logits = model.net(xb)
            loss = F.cross_entropy(logits, yb)
            if not torch.isfinite(loss):
                raise NonFiniteLoss(
                    f"loss {loss.item()!r} at epoch {epoch}, batch starting {start} "
                    f"(lr={hyper.learning_rate}, batch_size={hyper.batch_size})"
                )
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(idx)
            total_correct += int((logits.argmax(dim=1) == yb).sum())

        val_probs = predict_batch(model, x_val)
        val_acc = float(np.mean(val_probs.argmax(axis=1) == y_val))
        report.epochs.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=total_loss / len(train_records),
                train_accuracy=total_correct / len(train_records),
                val_accuracy=val_acc,
            )
        )
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_state = copy.deepcopy(model.net.state_dict())
            epochs_since_best = 0
        else:
            epochs_since_best += 1
            if hyper.early_stop_patience is not None and epochs_since_best >= hyper.early_stop_patience:
                break

    model.net.load_state_dict(best_state)
    model.net.eval()
    if model.feature_config_hash is None:
        model.feature_config_hash = getattr(feature_source, "config_hash", None)
    report.best_epoch = best_epoch
    report.wall_seconds = time.perf_counter() - started
    return report


def save_model(model: AudioModel, artifact_dir: str | Path) -> None:
    """Persist weights plus metadata (taxonomy, config, feature hash)."""
    artifact_dir = Path(artifact_dir)
    artifact_dir.mkdir(parents=True, exist_ok=True)
    metadata = {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "kind": model.cfg.kind,
        "taxonomy": list(CANONICAL_LABELS),
        "audio_model_config": model.cfg.model_dump(),
        "feature_config_hash": model.feature_config_hash,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    (artifact_dir / METADATA_FILE).write_text(json.dumps(metadata, indent=2, sort_keys=True))
    torch.save(model.net.state_dict(), artifact_dir / WEIGHTS_FILE)


def load_model(artifact_dir: str | Path) -> AudioModel:
    """Load a saved model; predictions match the saved model on any input.

    Raises:
        CorruptArtifact: missing/unreadable metadata or weights.
        ArtifactMismatch: artifact taxonomy differs from the canonical order.
    """
    artifact_dir = Path(artifact_dir)
    meta_path = artifact_dir / METADATA_FILE
    if not meta_path.exists():
        raise CorruptArtifact(f"missing {METADATA_FILE} in {artifact_dir}")
    try:
        metadata = json.loads(meta_path.read_text())
        cfg = AudioModelConfig(**metadata["audio_model_config"])
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptArtifact(f"unreadable metadata in {artifact_dir}: {exc}") from exc
    if metadata.get("schema_version") != ARTIFACT_SCHEMA_VERSION:
        raise CorruptArtifact(
            f"artifact schema_version {metadata.get('schema_version')!r} not supported"
        )
    if metadata.get("taxonomy") != list(CANONICAL_LABELS):
        raise ArtifactMismatch(
            f"artifact taxonomy {metadata.get('taxonomy')} != canonical {list(CANONICAL_LABELS)}"
        )
    model = build_model(cfg, seed=0)
    try:
        state = torch.load(artifact_dir / WEIGHTS_FILE, map_location="cpu", weights_only=True)
        model.net.load_state_dict(state)
    except Exception as exc:
        raise CorruptArtifact(f"unreadable weights in {artifact_dir}: {exc}") from exc
    model.net.eval()
    model.feature_config_hash = metadata.get("feature_config_hash")
    return model
