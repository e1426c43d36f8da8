"""Dataset records, stratified split assignment, and manifest persistence.

A manifest is the unit of training/evaluation input: a labeled, split,
provenance-tracked index of audio clips and/or text records, persisted as
line-delimited JSON with a header object.
"""

from __future__ import annotations

import dataclasses
import enum
import json
import math
import os
import tempfile
import warnings
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import CorruptManifest, DegenerateClassWarning
from .taxonomy import EmotionLabel

SCHEMA_VERSION = "1"
SPLITS = ("train", "val", "test")


class Corpus(str, enum.Enum):
    RAVDESS = "ravdess"
    TESS = "tess"
    SAVEE = "savee"
    CREMA_D = "crema_d"
    EMO_DB = "emo_db"
    CUSTOM = "custom"


@dataclass(frozen=True)
class AudioClipRecord:
    clip_id: str
    source_path: str
    corpus: Corpus
    label: EmotionLabel
    speaker_id: str
    split: str | None = None


@dataclass(frozen=True)
class TextRecord:
    text_id: str
    content: str
    label: EmotionLabel
    split: str | None = None


Record = AudioClipRecord | TextRecord


def record_id(record: Record) -> str:
    return record.clip_id if isinstance(record, AudioClipRecord) else record.text_id


@dataclass
class DatasetManifest:
    records: list[Record]
    split_seed: int
    split_fractions: tuple[float, float, float]
    created_at: str
    corpus_versions: dict[str, str] = field(default_factory=dict)

    def split_records(self, split: str) -> list[Record]:
        return [r for r in self.records if r.split == split]

    def audio_records(self, split: str | None = None) -> list[AudioClipRecord]:
        return [
            r for r in self.records
            if isinstance(r, AudioClipRecord) and (split is None or r.split == split)
        ]

    def text_records(self, split: str | None = None) -> list[TextRecord]:
        return [
            r for r in self.records
            if isinstance(r, TextRecord) and (split is None or r.split == split)
        ]


def _split_counts(n: int, fractions: tuple[float, float, float]) -> list[int]:
    """Per-split counts by largest remainder; |count - n*f| < 1 per split."""
    targets = [n * f for f in fractions]
    counts = [math.floor(t) for t in targets]
    leftover = n - sum(counts)
    order = sorted(range(3), key=lambda i: (-(targets[i] - counts[i]), i))
    for i in order[:leftover]:
        counts[i] += 1
    return counts


def build_manifest(
    records: list[Record],
    fractions: tuple[float, float, float] = (0.8, 0.1, 0.1),
    seed: int = 42,
    corpus_versions: dict[str, str] | None = None,
    created_at: str | None = None,
) -> DatasetManifest:
    """Assign stratified train/val/test splits, reproducibly for a given seed.

    Records are grouped by label; each group is shuffled with a seed derived
    from (seed, class index) and sliced by largest-remainder counts, so the
    assignment is a pure function of the record set, fractions, and seed.
    Classes with fewer records than the three requested splits go entirely to
    train with a :class:`DegenerateClassWarning`.
    """
    if not records:
        raise ValueError("records must be non-empty")
    if len(fractions) != 3 or any(f <= 0 for f in fractions):
        raise ValueError(f"fractions must be three positive values, got {fractions}")
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got sum={sum(fractions)!r}")

    ids = [record_id(r) for r in records]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise ValueError(f"duplicate record ids: {dupes[:5]}")

    by_label: dict[EmotionLabel, list[Record]] = {}
    for r in sorted(records, key=record_id):
        by_label.setdefault(r.label, []).append(r)

    assigned: list[Record] = []
    for label in sorted(by_label, key=int):
        group = by_label[label]
        n = len(group)
        if n < len(SPLITS):
            warnings.warn(
                f"class {label.label!r} has {n} record(s), fewer than 3 splits; "
                "assigning all to train",
                DegenerateClassWarning,
                stacklevel=2,
            )
            assigned.extend(dataclasses.replace(r, split="train") for r in group)
            continue
        rng = np.random.default_rng([seed, int(label)])
        perm = rng.permutation(n)
        counts = _split_counts(n, tuple(fractions))
        bounds = np.cumsum([0] + counts)
        for split_name, lo, hi in zip(SPLITS, bounds[:-1], bounds[1:]):
            for idx in perm[lo:hi]:
                assigned.append(dataclasses.replace(group[idx], split=split_name))

    assigned.sort(key=record_id)
    return DatasetManifest(
        records=assigned,
        split_seed=seed,
        split_fractions=tuple(float(f) for f in fractions),
        created_at=created_at or datetime.now(timezone.utc).isoformat(),
        corpus_versions=dict(corpus_versions or {}),
    )


def _record_to_json(record: Record) -> dict:
    if isinstance(record, AudioClipRecord):
        return {
            "record_type": "audio",
            "clip_id": record.clip_id,
            "source_path": record.source_path,
            "corpus": record.corpus.value,
            "label": record.label.label,
            "speaker_id": record.speaker_id,
            "split": record.split,
        }
    return {
        "record_type": "text",
        "text_id": record.text_id,
        "content": record.content,
        "label": record.label.label,
        "split": record.split,
    }


def _record_from_json(obj: dict) -> Record:
    kind = obj.get("record_type")
    label = EmotionLabel.from_name(obj["label"])
    if kind == "audio":
        return AudioClipRecord(
            clip_id=obj["clip_id"],
            source_path=obj["source_path"],
            corpus=Corpus(obj["corpus"]),
            label=label,
            speaker_id=obj["speaker_id"],
            split=obj["split"],
        )
    if kind == "text":
        return TextRecord(
            text_id=obj["text_id"],
            content=obj["content"],
            label=label,
            split=obj["split"],
        )
    raise KeyError(f"unknown record_type {kind!r}")


def save_manifest(manifest: DatasetManifest, path: str | Path) -> None:
    """Write the manifest as JSONL: one header object, then one record per line.

    The write is atomic (temp file + rename) so concurrent readers never see
    a partial manifest.
    """
    path = Path(path)
    header = {
        "schema_version": SCHEMA_VERSION,
        "split_seed": manifest.split_seed,
        "split_fractions": list(manifest.split_fractions),
        "created_at": manifest.created_at,
        "corpus_versions": manifest.corpus_versions,
        "n_records": len(manifest.records),
    }
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(json.dumps(header, sort_keys=True) + "\n")
            for record in manifest.records:
                fh.write(json.dumps(_record_to_json(record), sort_keys=True) + "\n")
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_manifest(path: str | Path) -> DatasetManifest:
    """Load a manifest written by :func:`save_manifest`.

    Raises:
        CorruptManifest: unreadable file, unknown schema version, or a record
            count that does not match the header (truncation).
    """
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise CorruptManifest(f"cannot read manifest {path}: {exc}") from exc
    if not lines:
        raise CorruptManifest(f"manifest {path} is empty")
    try:
        header = json.loads(lines[0])
        version = header.get("schema_version")
        if version != SCHEMA_VERSION:
            raise CorruptManifest(
                f"manifest {path} has schema_version {version!r}, expected {SCHEMA_VERSION!r}"
            )
        records = [_record_from_json(json.loads(line)) for line in lines[1:] if line.strip()]
        expected = header["n_records"]
        if len(records) != expected:
            raise CorruptManifest(
                f"manifest {path} is truncated: header says {expected} records, found {len(records)}"
            )
        return DatasetManifest(
            records=records,
            split_seed=int(header["split_seed"]),
            split_fractions=tuple(float(f) for f in header["split_fractions"]),
            created_at=str(header["created_at"]),
            corpus_versions=dict(header["corpus_versions"]),
        )
    except CorruptManifest:
        raise
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise CorruptManifest(f"manifest {path} is malformed: {exc}") from exc
