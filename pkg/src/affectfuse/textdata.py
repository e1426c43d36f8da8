"""Loader for delimited emotion-labeled text datasets (tweet CSVs)."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

from .errors import EmptyDataset, MissingColumn, UnmappableLabel
from .manifest import TextRecord
from .taxonomy import normalize_label

DEFAULT_SCHEMA = {"content": "content", "label": "label"}


@dataclass
class SkipReport:
    """Why rows were dropped during a text dataset load."""

    n_loaded: int = 0
    n_skipped_unmappable: int = 0
    n_skipped_empty: int = 0
    details: list[tuple[int, str]] = field(default_factory=list)

    @property
    def n_skipped(self) -> int:
        return self.n_skipped_unmappable + self.n_skipped_empty


def load_text_dataset(
    path: str | Path,
    schema: Mapping[str, str] | None = None,
    delimiter: str = ",",
) -> tuple[list[TextRecord], SkipReport]:
    """Load a delimited table of (content, label) rows into text records.

    `schema` maps the logical names "content" and "label" to the file's
    column names. Rows with unmappable labels or empty content are skipped
    and counted in the returned :class:`SkipReport`.

    Raises:
        MissingColumn: a mapped column is absent from the file header.
        EmptyDataset: zero rows survived mapping.
    """
    path = Path(path)
    schema = dict(DEFAULT_SCHEMA, **(schema or {}))
    content_col, label_col = schema["content"], schema["label"]

    records: list[TextRecord] = []
    report = SkipReport()
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh, delimiter=delimiter)
        header = reader.fieldnames or []
        for col in (content_col, label_col):
            if col not in header:
                raise MissingColumn(f"column {col!r} not in {path.name} header {header}")
        for i, row in enumerate(reader, start=1):
            content = (row.get(content_col) or "").strip()
            raw_label = (row.get(label_col) or "").strip()
            if not content:
                report.n_skipped_empty += 1
                report.details.append((i, "empty content"))
                continue
            try:
                label = normalize_label(raw_label)
            except UnmappableLabel:
                report.n_skipped_unmappable += 1
                report.details.append((i, f"unmappable label {raw_label!r}"))
                continue
            records.append(TextRecord(text_id=f"{path.stem}:{i:06d}", content=content, label=label))

    if not records:
        raise EmptyDataset(f"{path} produced zero mappable rows ({report.n_skipped} skipped)")
    report.n_loaded = len(records)
    return records, report
