"""Shared domain types and the exact vector/bit arithmetic used by every stage.

Similarity scores live in [-1, 1] internally.  Bucket boundaries are expressed
in centi-score (score x 100) so that the half-open tier intervals
(Bronze = [51.5, 52.5) and so on) read the same way operators talk about them.
All types here are immutable values after construction and safe to share
read-only across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import (
    DimensionError,
    EmptyReferenceError,
    NormalizationError,
    UnknownCountryError,
)

#: The 11 supported country codes (ISO 3166-1 alpha-2).
SEA_COUNTRIES = frozenset(
    {"BN", "KH", "ID", "LA", "MY", "MM", "PH", "SG", "TH", "TL", "VN"}
)

#: Tolerance on the unit-norm invariant of embedding vectors.
NORM_TOLERANCE = 1e-6


class Source(str, Enum):
    """Where an image record came from."""

    CRAWLED = "crawled"
    CROWDSOURCED = "crowdsourced"


class BucketLabel(str, Enum):
    """Similarity tier names, ordered from lowest to highest score."""

    DROPPED = "Dropped"
    BRONZE = "Bronze"
    SILVER = "Silver"
    GOLD = "Gold"
    PLATINUM = "Platinum"
    DIAMOND = "Diamond"


@dataclass(frozen=True)
class SimilarityBucket:
    """A half-open centi-score interval [lower, upper).

    Diamond is unbounded above (upper = +inf); Dropped is unbounded below
    (lower = -inf).  The six buckets partition the whole centi-score line.
    """

    label: BucketLabel
    lower: float
    upper: float

    def contains(self, centi: float) -> bool:
        return self.lower <= centi < self.upper


#: The full partition, in ascending score order.
BUCKETS: tuple[SimilarityBucket, ...] = (
    SimilarityBucket(BucketLabel.DROPPED, -math.inf, 51.5),
    SimilarityBucket(BucketLabel.BRONZE, 51.5, 52.5),
    SimilarityBucket(BucketLabel.SILVER, 52.5, 53.5),
    SimilarityBucket(BucketLabel.GOLD, 53.5, 54.5),
    SimilarityBucket(BucketLabel.PLATINUM, 54.5, 55.5),
    SimilarityBucket(BucketLabel.DIAMOND, 55.5, math.inf),
)

BUCKET_BY_LABEL = {b.label: b for b in BUCKETS}

#: Buckets that hold retained images (everything except Dropped).
SCORED_BUCKETS: tuple[SimilarityBucket, ...] = BUCKETS[1:]


def bucket_for_centi(centi: float) -> SimilarityBucket:
    """Return the unique bucket containing a centi-score. Total over the reals."""
    for bucket in reversed(BUCKETS):
        if centi >= bucket.lower:
            return bucket
    return BUCKETS[0]  # only reachable for NaN; treat as Dropped


def bucket_for_score(score: float) -> SimilarityBucket:
    """Bucket for a similarity score in [-1, 1]."""
    return bucket_for_centi(score * 100.0)


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    """A unit-norm real vector produced by an image encoding backend.

    The wrapped array is float64, read-only, with Euclidean norm 1 within
    1e-6 and all entries finite.
    """

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NormalizationError("embedding contains non-finite entries")
        norm = float(np.linalg.norm(arr))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(f"embedding norm {norm!r} deviates from 1 by more than {NORM_TOLERANCE}")
        arr = arr.copy()
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    @property
    def dims(self) -> int:
        return int(self.values.shape[0])

    def __eq__(self, other) -> bool:
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.values, other.values))

    def __hash__(self):
        return hash(self.values.tobytes())


def normalize(raw: Sequence[float] | np.ndarray) -> EmbeddingVector:
    """Scale a raw vector to unit norm, preserving direction.

    Raises NormalizationError for the zero vector or non-finite entries.
    """
    arr = np.asarray(raw, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DimensionError(f"expected a non-empty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NormalizationError("cannot normalize a vector with non-finite entries")
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise NormalizationError("cannot normalize the zero vector")
    return EmbeddingVector(arr / norm)


def cosine(a: EmbeddingVector, b: EmbeddingVector) -> float:
    """Cosine similarity of two unit vectors: their dot product, clamped to [-1, 1].

    Clamping absorbs floating-point overshoot instead of erroring.
    """
    if a.dims != b.dims:
        raise DimensionError(f"dimension mismatch: {a.dims} vs {b.dims}")
    return float(np.clip(np.dot(a.values, b.values), -1.0, 1.0))


@dataclass(frozen=True)
class PerceptualHash:
    """A 64-bit DCT hash with Hamming-distance semantics."""

    bits: int

    def __post_init__(self):
        if not 0 <= self.bits < 1 << 64:
            raise ValueError(f"hash must fit in 64 bits, got {self.bits!r}")

    def hex(self) -> str:
        return f"{self.bits:016x}"

    @classmethod
    def from_hex(cls, text: str) -> "PerceptualHash":
        if len(text) != 16:
            raise ValueError(f"expected 16 hex digits, got {text!r}")
        return cls(int(text, 16))


def hamming(h1: PerceptualHash, h2: PerceptualHash) -> int:
    """Number of differing bits between two 64-bit hashes (0..64)."""
    return (h1.bits ^ h2.bits).bit_count()


@dataclass(frozen=True)
class ReferenceSet:
    """Curated embeddings of known-relevant images; the anchor for filtering.

    Non-empty, with uniform dimensionality.
    """

    embeddings: tuple[EmbeddingVector, ...]
    provenance: str = ""

    def __post_init__(self):
        embeddings = tuple(self.embeddings)
        if not embeddings:
            raise EmptyReferenceError("reference set must contain at least one embedding")
        dims = embeddings[0].dims
        for e in embeddings:
            if e.dims != dims:
                raise DimensionError(f"reference dims not uniform: {e.dims} vs {dims}")
        object.__setattr__(self, "embeddings", embeddings)

    @property
    def dims(self) -> int:
        return self.embeddings[0].dims

    def __len__(self) -> int:
        return len(self.embeddings)

    def matrix(self) -> np.ndarray:
        """All reference vectors stacked as a (count, dims) float64 matrix."""
        return np.vstack([e.values for e in self.embeddings])


@dataclass
class ImageRecord:
    """One image flowing through the pipeline, with source and state metadata.

    Exactly one of url/local_path is set before fetch; a successful fetch
    fills local_path (url is kept for provenance).  regions is a subset of
    the 11-country set and may hold more than one entry.
    """

    id: str
    source: Source
    url: Optional[str] = None
    local_path: Optional[str] = None
    caption_en: Optional[str] = None
    caption_native: Optional[str] = None
    native_language: Optional[str] = None
    regions: frozenset[str] = field(default_factory=frozenset)
    similarity_score: Optional[float] = None
    bucket: Optional[BucketLabel] = None
    cluster_id: Optional[str] = None
    pii_cleared: bool = False

    def __post_init__(self):
        if not self.id:
            raise ValueError("record id must be non-empty")
        self.source = Source(self.source)
        self.regions = frozenset(self.regions)
        unknown = self.regions - SEA_COUNTRIES
        if unknown:
            raise UnknownCountryError(f"unknown region codes: {sorted(unknown)}")
        if self.url is None and self.local_path is None:
            raise ValueError("record needs url or local_path")
        if self.similarity_score is not None and not -1.0 <= self.similarity_score <= 1.0:
            raise ValueError(f"similarity_score out of [-1, 1]: {self.similarity_score}")
        if self.bucket is not None:
            self.bucket = BucketLabel(self.bucket)

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "source": self.source.value,
            "url": self.url,
            "local_path": self.local_path,
            "caption_en": self.caption_en,
            "caption_native": self.caption_native,
            "native_language": self.native_language,
            "regions": sorted(self.regions),
            "similarity_score": self.similarity_score,
            "bucket": self.bucket.value if self.bucket else None,
            "cluster_id": self.cluster_id,
            "pii_cleared": self.pii_cleared,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ImageRecord":
        return cls(
            id=data["id"],
            source=Source(data["source"]),
            url=data.get("url"),
            local_path=data.get("local_path"),
            caption_en=data.get("caption_en"),
            caption_native=data.get("caption_native"),
            native_language=data.get("native_language"),
            regions=frozenset(data.get("regions") or ()),
            similarity_score=data.get("similarity_score"),
            bucket=BucketLabel(data["bucket"]) if data.get("bucket") else None,
            cluster_id=data.get("cluster_id"),
            pii_cleared=bool(data.get("pii_cleared", False)),
        )


def unique_ids(records: Iterable[ImageRecord]) -> None:
    """Raise ValueError if any record id repeats within a corpus."""
    seen: set[str] = set()
    for r in records:
        if r.id in seen:
            raise ValueError(f"duplicate record id: {r.id!r}")
        seen.add(r.id)
