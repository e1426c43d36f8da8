"""Transformer text classifier: normalization, fine-tuning, prediction.

The pretrained encoder is resolved from a registry: a local directory of
saved models (offline mode) or the public hub when network access exists.
Resolution failures raise :class:`RegistryUnavailable` and never leave
partial local state behind.
"""

from __future__ import annotations

import copy
import dataclasses
import json
import re
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from filelock import FileLock
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .errors import (
    ArtifactMismatch,
    CorruptArtifact,
    EmptySplit,
    EmptyText,
    NonFiniteLoss,
    RegistryUnavailable,
)
from .manifest import DatasetManifest
from .taxonomy import CANONICAL_LABELS, EmotionDistribution, N_CLASSES
from .training import EpochMetrics, TrainReport

ARTIFACT_SCHEMA_VERSION = "1"
METADATA_FILE = "metadata.json"
HF_SUBDIR = "hf"

_URL_RE = re.compile(r"(?:https?://|www\.)\S+")
_MENTION_RE = re.compile(r"@\w+")


def normalize_text(raw: str) -> str:
    """Lowercase, replace URLs/mentions with tokens, collapse whitespace."""
    text = raw.lower()
    text = _URL_RE.sub("<url>", text)
    text = _MENTION_RE.sub("<user>", text)
    return " ".join(text.split())


class TextModelConfig(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid")

    pretrained_id: str = "distilbert-base-uncased"
    max_tokens: int = Field(default=128, ge=8)
    n_classes: int = 8
    registry_dir: str | None = None
    offline: bool = False

    @model_validator(mode="after")
    def _check(self) -> "TextModelConfig":
        if self.n_classes != N_CLASSES:
            raise ValueError(f"n_classes must be {N_CLASSES}, got {self.n_classes}")
        return self


@dataclass
class TextTrainHyper:
    epochs: int = 3
    batch_size: int = 16
    learning_rate: float = 2e-5
    seed: int = 42

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TextModel:
    tokenizer: object
    net: torch.nn.Module
    cfg: TextModelConfig


def _registry_path(cfg: TextModelConfig) -> Path | None:
    if cfg.registry_dir is None:
        return None
    candidate = Path(cfg.registry_dir) / cfg.pretrained_id
    return candidate if candidate.is_dir() else None


def resolve_pretrained(cfg: TextModelConfig) -> tuple[object, torch.nn.Module]:
    """Resolve (tokenizer, classifier-with-fresh-head) for cfg.pretrained_id.

    Looks in the local registry directory first; falls back to the hub unless
    offline mode is set. Hub fetches are serialized with a file lock so
    concurrent processes cannot corrupt the cache.

    Raises:
        RegistryUnavailable: weights not resolvable (retryable for network
            failures, non-retryable for a corrupt local entry).
    """
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    local = _registry_path(cfg)
    if local is not None:
        try:
            tokenizer = AutoTokenizer.from_pretrained(local)
            net = AutoModelForSequenceClassification.from_pretrained(
                local, num_labels=cfg.n_classes
            )
            return tokenizer, net
        except Exception as exc:
            raise RegistryUnavailable(
                f"registry entry {local} is unreadable: {exc}", retryable=False
            ) from exc
    if cfg.offline:
        raise RegistryUnavailable(
            f"offline mode and {cfg.pretrained_id!r} is not in the registry "
            f"({cfg.registry_dir or 'no registry_dir configured'})",
            retryable=False,
        )
    lock_dir = Path(cfg.registry_dir) if cfg.registry_dir else Path.home() / ".cache" / "affectfuse"
    lock_dir.mkdir(parents=True, exist_ok=True)
    try:
        with FileLock(lock_dir / "registry.lock"):
            tokenizer = AutoTokenizer.from_pretrained(cfg.pretrained_id)
            net = AutoModelForSequenceClassification.from_pretrained(
                cfg.pretrained_id, num_labels=cfg.n_classes
            )
        return tokenizer, net
    except Exception as exc:
        raise RegistryUnavailable(
            f"cannot fetch {cfg.pretrained_id!r} from the model hub: {exc}", retryable=True
        ) from exc


def _encode(tokenizer, texts: list[str], max_tokens: int) -> dict[str, torch.Tensor]:
    return tokenizer(
        texts,
        padding=True,
        truncation=True,
        max_length=max_tokens,
        return_tensors="pt",
    )


def fine_tune(
    cfg: TextModelConfig,
    manifest: DatasetManifest,
    hyper: TextTrainHyper,
) -> tuple[TextModel, TrainReport]:
    """Attach an 8-way head to the pretrained encoder and train end to end.

    Cross-entropy over seeded shuffles of the text train split; texts are
    normalized and truncated/padded to max_tokens; the best-validation
    checkpoint is kept.

    Raises:
        EmptySplit: no text records in train or val.
        RegistryUnavailable: pretrained weights not resolvable.
        NonFiniteLoss: training diverged.
    """
    train_records = manifest.text_records("train")
    val_records = manifest.text_records("val")
    if not train_records:
        raise EmptySplit("manifest has no text records in the train split")
    if not val_records:
        raise EmptySplit("manifest has no text records in the val split")

    started = time.perf_counter()
    torch.manual_seed(hyper.seed)
    tokenizer, net = resolve_pretrained(cfg)
    model = TextModel(tokenizer=tokenizer, net=net, cfg=cfg)

    train_texts = [normalize_text(r.content) for r in train_records]
    val_texts = [normalize_text(r.content) for r in val_records]
    y_train = torch.as_tensor([int(r.label) for r in train_records])
    y_val = np.asarray([int(r.label) for r in val_records])

    enc_train = _encode(tokenizer, train_texts, cfg.max_tokens)
    enc_val = _encode(tokenizer, val_texts, cfg.max_tokens)

    rng = np.random.default_rng(hyper.seed)
    optimizer = torch.optim.AdamW(net.parameters(), lr=hyper.learning_rate)
    report = TrainReport(model_config=cfg.model_dump(), hyper=dataclasses.asdict(hyper))
    best_state = copy.deepcopy(net.state_dict())
    best_val = -1.0
    best_epoch = 0

    for epoch in range(1, hyper.epochs + 1):
        net.train()
        perm = rng.permutation(len(train_texts))
        total_loss = 0.0
        total_correct = 0
        for start in range(0, len(perm), hyper.batch_size):
            idx = torch.as_tensor(perm[start:start + hyper.batch_size])
            batch = {k: v[idx] for k, v in enc_train.items()}
            optimizer.zero_grad()
            logits = net(**batch).logits
            loss = F.cross_entropy(logits, y_train[idx])
            if not torch.isfinite(loss):
                raise NonFiniteLoss(f"text loss {loss.item()!r} at epoch {epoch}")
            loss.backward()
            optimizer.step()
            total_loss += float(loss.detach()) * len(idx)
            total_correct += int((logits.argmax(dim=1) == y_train[idx]).sum())

        net.eval()
        with torch.no_grad():
            val_logits = net(**enc_val).logits
        val_acc = float((val_logits.argmax(dim=1).numpy() == y_val).mean())
        report.epochs.append(
            EpochMetrics(
                epoch=epoch,
                train_loss=total_loss / len(train_texts),
                train_accuracy=total_correct / len(train_texts),
                val_accuracy=val_acc,
            )
        )
        if val_acc > best_val:
            best_val = val_acc
            best_epoch = epoch
            best_state = copy.deepcopy(net.state_dict())

    net.load_state_dict(best_state)
    net.eval()
    report.best_epoch = best_epoch
    report.wall_seconds = time.perf_counter() - started
    return model, report


def predict_text(model: TextModel, text: str) -> EmotionDistribution:
    """Emotion distribution for one text; input is normalized first.

    Raises:
        EmptyText: nothing left after normalization.
    """
    normalized = normalize_text(text)
    if not normalized:
        raise EmptyText("text is empty after normalization")
    enc = _encode(model.tokenizer, [normalized], model.cfg.max_tokens)
    model.net.eval()
    with torch.no_grad():
        logits = model.net(**enc).logits
    probs = F.softmax(logits, dim=1).squeeze(0).to(torch.float64).numpy()
    return EmotionDistribution.from_probs(probs / probs.sum())


def save_text_model(model: TextModel, artifact_dir: str | Path) -> None:
    """Persist tokenizer + weights plus taxonomy/config metadata."""
    artifact_dir = Path(artifact_dir)
    hf_dir = artifact_dir / HF_SUBDIR
    hf_dir.mkdir(parents=True, exist_ok=True)
    metadata = {
        "schema_version": ARTIFACT_SCHEMA_VERSION,
        "kind": "text",
        "taxonomy": list(CANONICAL_LABELS),
        "pretrained_id": model.cfg.pretrained_id,
        "max_tokens": model.cfg.max_tokens,
        "created_at": datetime.now(timezone.utc).isoformat(),
    }
    (artifact_dir / METADATA_FILE).write_text(json.dumps(metadata, indent=2, sort_keys=True))
    model.net.save_pretrained(hf_dir)
    model.tokenizer.save_pretrained(hf_dir)


def load_text_model(artifact_dir: str | Path) -> TextModel:
    """Load a saved text model.

    Raises:
        CorruptArtifact: missing metadata or unreadable weights.
        ArtifactMismatch: artifact taxonomy differs from the canonical order.
    """
    from transformers import AutoModelForSequenceClassification, AutoTokenizer

    artifact_dir = Path(artifact_dir)
    meta_path = artifact_dir / METADATA_FILE
    if not meta_path.exists():
        raise CorruptArtifact(f"missing {METADATA_FILE} in {artifact_dir}")
    try:
        metadata = json.loads(meta_path.read_text())
    except (json.JSONDecodeError, OSError) as exc:
        raise CorruptArtifact(f"unreadable metadata in {artifact_dir}: {exc}") from exc
    if metadata.get("schema_version") != ARTIFACT_SCHEMA_VERSION:
        raise CorruptArtifact(
            f"artifact schema_version {metadata.get('schema_version')!r} not supported"
        )
    if metadata.get("taxonomy") != list(CANONICAL_LABELS):
        raise ArtifactMismatch(
            f"artifact taxonomy {metadata.get('taxonomy')} != canonical {list(CANONICAL_LABELS)}"
        )
    cfg = TextModelConfig(
        pretrained_id=metadata["pretrained_id"],
        max_tokens=metadata["max_tokens"],
    )
    try:
        tokenizer = AutoTokenizer.from_pretrained(artifact_dir / HF_SUBDIR)
        net = AutoModelForSequenceClassification.from_pretrained(artifact_dir / HF_SUBDIR)
    except Exception as exc:
        raise CorruptArtifact(f"unreadable model files in {artifact_dir}: {exc}") from exc
    net.eval()
    return TextModel(tokenizer=tokenizer, net=net, cfg=cfg)
