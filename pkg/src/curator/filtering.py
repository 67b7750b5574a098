"""Reference-similarity filtering and bucket statistics.

An image is retained when its mean cosine similarity against a curated
reference set reaches the threshold rho (ties retain).  Scores at or above
the prefilter floor are recorded with their similarity bucket so the
human-calibration loop can stratify by tier; scores below the floor are
counted but not stored.
"""

from __future__ import annotations

import csv
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .core import (
    BUCKETS,
    BucketLabel,
    EmbeddingVector,
    ImageRecord,
    ReferenceSet,
    SimilarityBucket,
    bucket_for_score,
    normalize,
)
from .errors import DimensionError

_REFERENCE_MAGIC = b"CREF"
_REFERENCE_HEADER = struct.Struct("<4sII4x")  # magic, dims, count, reserved


@dataclass(frozen=True)
class FilterConfig:
    """Retention threshold rho plus the hard prefilter floor."""

    rho: float
    reference: ReferenceSet
    prefilter_floor: float = 0.515

    def __post_init__(self):
        if not -1.0 <= self.rho <= 1.0:
            raise ValueError(f"rho out of [-1, 1]: {self.rho}")
        if self.prefilter_floor > self.rho:
            raise ValueError(
                f"prefilter_floor {self.prefilter_floor} must not exceed rho {self.rho}"
            )


@dataclass(frozen=True)
class ScoredEntry:
    record: ImageRecord
    score: float
    bucket: SimilarityBucket
    retained: bool


@dataclass
class ScoredCorpus:
    """Scoring outcome: stored entries (score >= floor), plus loss accounting."""

    entries: list[ScoredEntry]
    below_floor: int = 0
    unscored: tuple[str, ...] = ()
    config: Optional[FilterConfig] = None

    def retained_entries(self) -> list[ScoredEntry]:
        return [e for e in self.entries if e.retained]

    def retained_ids(self) -> set[str]:
        return {e.record.id for e in self.retained_entries()}

    def by_bucket(self) -> dict[BucketLabel, list[ScoredEntry]]:
        grouped: dict[BucketLabel, list[ScoredEntry]] = {}
        for e in self.entries:
            grouped.setdefault(e.bucket.label, []).append(e)
        return grouped

    @property
    def total_scored(self) -> int:
        """Images that produced a score, stored or not."""
        return len(self.entries) + self.below_floor


def assign_bucket(score: float) -> SimilarityBucket:
    """Total mapping from similarity score to its tier."""
    return bucket_for_score(score)


def mean_reference_similarity(x: EmbeddingVector, ref: ReferenceSet) -> float:
    """Mean cosine similarity of x against every reference embedding."""
    if x.dims != ref.dims:
        raise DimensionError(f"dimension mismatch: {x.dims} vs reference {ref.dims}")
    sims = np.clip(ref.matrix() @ x.values, -1.0, 1.0)
    return float(sims.mean())


def score_embeddings(
    items: Sequence[tuple[ImageRecord, EmbeddingVector]], config: FilterConfig
) -> ScoredCorpus:
    """Score pre-embedded records against the reference set."""
    entries: list[ScoredEntry] = []
    below = 0
    for record, vec in items:
        score = mean_reference_similarity(vec, config.reference)
        if score < config.prefilter_floor:
            below += 1
            continue
        entries.append(
            ScoredEntry(
                record=record,
                score=score,
                bucket=assign_bucket(score),
                retained=score >= config.rho,
            )
        )
    entries.sort(key=lambda e: e.record.id)
    return ScoredCorpus(entries=entries, below_floor=below, config=config)


def filter_corpus(
    corpus: Sequence[ImageRecord], provider, config: FilterConfig
) -> ScoredCorpus:
    """Encode fetched records and apply the retention rule.

    Records that cannot be read or encoded are reported as unscored; the
    run continues.  Entries are assembled in record-id order so the result
    does not depend on scheduling.
    """
    readable: list[tuple[ImageRecord, bytes]] = []
    unscored: list[str] = []
    for record in corpus:
        if not record.local_path:
            unscored.append(record.id)
            continue
        try:
            data = Path(record.local_path).read_bytes()
        except OSError:
            unscored.append(record.id)
            continue
        readable.append((record, data))

    result = provider.encode_batch([data for _, data in readable])
    items: list[tuple[ImageRecord, EmbeddingVector]] = []
    for idx, (record, _) in enumerate(readable):
        vec = result.vectors[idx]
        if vec is None:
            unscored.append(record.id)
        else:
            items.append((record, vec))

    scored = score_embeddings(items, config)
    scored.unscored = tuple(sorted(unscored))
    for entry in scored.entries:
        entry.record.similarity_score = entry.score
        entry.record.bucket = entry.bucket.label
    return scored


def scored_from_records(
    records: Sequence[ImageRecord], config: Optional[FilterConfig] = None
) -> ScoredCorpus:
    """Rebuild a ScoredCorpus from records that already carry scores.

    Records without a similarity_score are reported as unscored.  When no
    config is given, retained reflects bucket membership above Dropped.
    """
    entries: list[ScoredEntry] = []
    unscored: list[str] = []
    for record in records:
        if record.similarity_score is None:
            unscored.append(record.id)
            continue
        bucket = assign_bucket(record.similarity_score)
        retained = (
            record.similarity_score >= config.rho
            if config is not None
            else bucket.label != BucketLabel.DROPPED
        )
        entries.append(
            ScoredEntry(
                record=record,
                score=record.similarity_score,
                bucket=bucket,
                retained=retained,
            )
        )
    entries.sort(key=lambda e: e.record.id)
    return ScoredCorpus(
        entries=entries, unscored=tuple(sorted(unscored)), config=config
    )


@dataclass(frozen=True)
class RetentionRow:
    label: BucketLabel
    count: int
    percent: float


@dataclass(frozen=True)
class RetentionTable:
    rows: tuple[RetentionRow, ...]
    total: int

    def row(self, label: BucketLabel) -> RetentionRow:
        for r in self.rows:
            if r.label == label:
                return r
        raise KeyError(label)


def retention_table(counts: dict[BucketLabel, int], total_count: int) -> RetentionTable:
    """Per-bucket counts and percentages of the given total.

    `counts` covers the stored buckets; anything not accounted for falls
    into the Dropped row.  Percentages are exact fractions (rendering may
    round); with a zero total every percentage is zero.
    """
    stored = sum(counts.values())
    if total_count < stored:
        raise ArithmeticError(
            f"total_count {total_count} is less than the stored count {stored}"
        )
    full = {b.label: counts.get(b.label, 0) for b in BUCKETS}
    full[BucketLabel.DROPPED] += total_count - stored
    rows = tuple(
        RetentionRow(
            label=b.label,
            count=full[b.label],
            percent=100.0 * full[b.label] / total_count if total_count else 0.0,
        )
        for b in BUCKETS
    )
    return RetentionTable(rows=rows, total=total_count)


def threshold_sweep(scored: ScoredCorpus, total_count: int) -> RetentionTable:
    """Retention table over a scored corpus, relative to total_count images."""
    counts: dict[BucketLabel, int] = {}
    for entry in scored.entries:
        counts[entry.bucket.label] = counts.get(entry.bucket.label, 0) + 1
    return retention_table(counts, total_count)


def write_retention_csv(path, table: RetentionTable) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["bucket", "count", "percent"])
        for row in table.rows:
            writer.writerow([row.label.value, row.count, f"{row.percent:.4f}"])


def render_retention_text(table: RetentionTable) -> str:
    lines = [f"{'Bucket':<10} {'Count':>12} {'%Images':>8}"]
    for row in table.rows:
        lines.append(f"{row.label.value:<10} {row.count:>12} {row.percent:>7.2f}%")
    lines.append(f"{'Total':<10} {table.total:>12}")
    return "\n".join(lines)


def save_reference(path, ref: ReferenceSet) -> None:
    """Write the reference matrix file: 16-byte header + float32 rows."""
    matrix = ref.matrix().astype("<f4")
    with Path(path).open("wb") as f:
        f.write(_REFERENCE_HEADER.pack(_REFERENCE_MAGIC, matrix.shape[1], matrix.shape[0]))
        f.write(matrix.tobytes())


def load_reference(path, provenance: str = "") -> ReferenceSet:
    raw = Path(path).read_bytes()
    if len(raw) < _REFERENCE_HEADER.size:
        raise ValueError("reference file too short")
    magic, dims, count = _REFERENCE_HEADER.unpack_from(raw)
    if magic != _REFERENCE_MAGIC:
        raise ValueError(f"bad reference file magic: {magic!r}")
    body = np.frombuffer(raw, dtype="<f4", offset=_REFERENCE_HEADER.size)
    if body.size != dims * count:
        raise ValueError(
            f"reference file claims {count}x{dims} but holds {body.size} floats"
        )
    matrix = body.reshape(count, dims)
    embeddings = tuple(normalize(row) for row in matrix)
    return ReferenceSet(embeddings=embeddings, provenance=provenance or str(path))
