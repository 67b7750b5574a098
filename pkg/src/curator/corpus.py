"""Corpus directory persistence.

A corpus directory holds `records.jsonl` (one record per line) and an
`images/` subdirectory with the fetched bytes.  Records are written
sorted by id so identical corpora serialize byte-identically.
"""

from __future__ import annotations

from pathlib import Path
from typing import Iterable, Sequence

import json

from .core import ImageRecord, unique_ids

RECORDS_FILE = "records.jsonl"
IMAGES_SUBDIR = "images"


def images_dir(corpus_dir) -> Path:
    return Path(corpus_dir) / IMAGES_SUBDIR


def save_corpus(records: Sequence[ImageRecord], corpus_dir) -> Path:
    """Write records.jsonl under corpus_dir; returns the file path."""
    unique_ids(records)
    directory = Path(corpus_dir)
    directory.mkdir(parents=True, exist_ok=True)
    images_dir(directory).mkdir(exist_ok=True)
    path = directory / RECORDS_FILE
    lines = [
        json.dumps(r.to_dict(), sort_keys=True)
        for r in sorted(records, key=lambda r: r.id)
    ]
    path.write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
    return path


def load_corpus(corpus_dir) -> list[ImageRecord]:
    """Read records.jsonl from corpus_dir."""
    path = Path(corpus_dir) / RECORDS_FILE
    records = []
    for line in path.read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if line:
            records.append(ImageRecord.from_dict(json.loads(line)))
    unique_ids(records)
    return records


def record_image_path(record: ImageRecord) -> Path:
    if record.local_path is None:
        raise FileNotFoundError(f"record {record.id} has no fetched image")
    return Path(record.local_path)


def read_image_bytes(record: ImageRecord) -> bytes:
    return record_image_path(record).read_bytes()


def records_by_id(records: Iterable[ImageRecord]) -> dict[str, ImageRecord]:
    return {r.id: r for r in records}
