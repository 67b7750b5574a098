"""Near-duplicate detection and clustering.

Two images are duplicates when their perceptual hashes are within a Hamming
distance bound, or when their embedding cosine similarity reaches a minimum
threshold.  The duplicate relation is made transitive by taking connected
components of the pairwise graph, so clusters partition the corpus.

Scan strategy: a full pairwise scan below EXACT_SCAN_LIMIT records; above
that, an exact blocked strategy (Hamming pigeonhole bands for hashes,
chunked matrix products for embeddings).  `DedupConfig.exact` forces the
naive per-pair path so tests can compare strategies.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from .core import (
    EmbeddingVector,
    ImageRecord,
    PerceptualHash,
    Source,
    cosine,
    hamming,
)
from .errors import EmptyInputError, MissingFeatureError

Feature = Union[PerceptualHash, EmbeddingVector]

#: Above this corpus size the blocked scan replaces the full pairwise scan.
EXACT_SCAN_LIMIT = 100_000


@dataclass(frozen=True)
class DedupConfig:
    """Method selection and thresholds for duplicate detection."""

    method: str  # "phash" or "embedding"
    epsilon: Optional[float] = None  # cosine duplicate threshold
    max_hamming: int = 16
    exact: Optional[bool] = None  # None = choose by corpus size

    def __post_init__(self):
        if self.method not in ("phash", "embedding"):
            raise ValueError(f"unknown dedup method {self.method!r}")
        if self.method == "embedding":
            if self.epsilon is None or not 0.0 < self.epsilon <= 1.0:
                raise ValueError("embedding method needs epsilon in (0, 1]")
        if not 0 <= self.max_hamming <= 64:
            raise ValueError("max_hamming must be in [0, 64]")


@dataclass(frozen=True)
class DuplicateCluster:
    """A connected component of the duplicate graph, with one canonical member."""

    cluster_id: str
    member_ids: frozenset[str]
    canonical_id: str
    flagged: bool = False  # feature extraction failed; forced singleton

    def __post_init__(self):
        if not self.member_ids:
            raise ValueError("cluster must be non-empty")
        if self.canonical_id not in self.member_ids:
            raise ValueError("canonical_id must be a member")


@dataclass(frozen=True)
class ThroughputSample:
    """One wall-clock measurement of feature extraction plus pairwise scan."""

    method: str
    images_processed: int
    elapsed: float
    images_per_second: float

    def __post_init__(self):
        if self.elapsed <= 0:
            raise ValueError("elapsed must be positive")
        expected = self.images_processed / self.elapsed
        if abs(self.images_per_second - expected) > 1e-9 * max(1.0, expected):
            raise ValueError("images_per_second must equal processed/elapsed")


class UnionFind:
    """Disjoint sets with path compression; roots are the smallest member."""

    def __init__(self):
        self.parent: dict[str, str] = {}

    def find(self, x: str) -> str:
        if x not in self.parent:
            self.parent[x] = x
            return x
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, x: str, y: str) -> None:
        px, py = self.find(x), self.find(y)
        root = min(px, py)
        self.parent[px] = self.parent[py] = root

    def components(self) -> dict[str, set[str]]:
        groups: dict[str, set[str]] = {}
        for x in self.parent:
            groups.setdefault(self.find(x), set()).add(x)
        return groups


def _require_feature(record: ImageRecord, features: Mapping[str, Feature], kind) -> Feature:
    feat = features.get(record.id)
    if feat is None or not isinstance(feat, kind):
        name = "hash" if kind is PerceptualHash else "embedding"
        raise MissingFeatureError(f"record {record.id!r} has no {name}")
    return feat


def is_duplicate(
    a: ImageRecord,
    b: ImageRecord,
    config: DedupConfig,
    features: Mapping[str, Feature],
) -> bool:
    """Pairwise duplicate predicate. Symmetric and reflexive."""
    if config.method == "phash":
        ha = _require_feature(a, features, PerceptualHash)
        hb = _require_feature(b, features, PerceptualHash)
        return hamming(ha, hb) <= config.max_hamming
    ea = _require_feature(a, features, EmbeddingVector)
    eb = _require_feature(b, features, EmbeddingVector)
    return cosine(ea, eb) >= config.epsilon


def _phash_pairs_exact(ids: list[str], hashes: list[int], bound: int):
    for i in range(len(ids)):
        hi = hashes[i]
        for j in range(i + 1, len(ids)):
            if (hi ^ hashes[j]).bit_count() <= bound:
                yield ids[i], ids[j]


def _phash_pairs_banded(ids: list[str], hashes: list[int], bound: int):
    """Pigeonhole banding: a pair within the bound must agree on one band."""
    n_bands = bound + 1
    if n_bands > 64:
        yield from _phash_pairs_exact(ids, hashes, bound)
        return
    base, extra = divmod(64, n_bands)
    widths = [base + 1] * extra + [base] * (n_bands - extra)
    seen: set[tuple[int, int]] = set()
    shift = 0
    for band, width in enumerate(widths):
        mask = (1 << width) - 1
        buckets: dict[int, list[int]] = {}
        for idx, h in enumerate(hashes):
            buckets.setdefault((h >> shift) & mask, []).append(idx)
        shift += width
        for members in buckets.values():
            for a_pos in range(len(members)):
                i = members[a_pos]
                for b_pos in range(a_pos + 1, len(members)):
                    j = members[b_pos]
                    key = (i, j) if i < j else (j, i)
                    if key in seen:
                        continue
                    if (hashes[i] ^ hashes[j]).bit_count() <= bound:
                        seen.add(key)
                        yield ids[key[0]], ids[key[1]]


def _embedding_pairs_blocked(ids: list[str], matrix: np.ndarray, epsilon: float, block: int = 2048):
    n = len(ids)
    for r0 in range(0, n, block):
        r1 = min(r0 + block, n)
        rows = matrix[r0:r1]
        for c0 in range(r0, n, block):
            c1 = min(c0 + block, n)
            sims = rows @ matrix[c0:c1].T
            ri, ci = np.nonzero(sims >= epsilon)
            for i, j in zip(ri + r0, ci + c0):
                if i < j:
                    yield ids[i], ids[j]


def _embedding_pairs_exact(ids: list[str], vectors: list[EmbeddingVector], epsilon: float):
    for i in range(len(ids)):
        vi = vectors[i]
        for j in range(i + 1, len(ids)):
            if cosine(vi, vectors[j]) >= epsilon:
                yield ids[i], ids[j]


def duplicate_pairs(
    records: Sequence[ImageRecord],
    features: Mapping[str, Feature],
    config: DedupConfig,
) -> Iterable[tuple[str, str]]:
    """All unordered duplicate pairs among records that have features."""
    featured = [r for r in records if r.id in features]
    ids = [r.id for r in featured]
    exact = config.exact if config.exact is not None else len(ids) <= EXACT_SCAN_LIMIT
    if config.method == "phash":
        kind = PerceptualHash
        hashes = [_require_feature(r, features, kind).bits for r in featured]
        if exact:
            return _phash_pairs_exact(ids, hashes, config.max_hamming)
        return _phash_pairs_banded(ids, hashes, config.max_hamming)
    kind = EmbeddingVector
    vectors = [_require_feature(r, features, kind) for r in featured]
    if exact:
        return _embedding_pairs_exact(ids, vectors, config.epsilon)
    matrix = np.vstack([v.values for v in vectors]) if vectors else np.empty((0, 0))
    return _embedding_pairs_blocked(ids, matrix, config.epsilon)


def _canonical_key(record: ImageRecord) -> tuple[bool, str]:
    # Crowdsourced members win over crawled; then smallest id.
    return (record.source != Source.CROWDSOURCED, record.id)


def dedup_corpus(
    records: Sequence[ImageRecord],
    features: Mapping[str, Feature],
    config: DedupConfig,
) -> list[DuplicateCluster]:
    """Cluster the corpus into connected components of the duplicate graph.

    Records without a usable feature become flagged singletons.  Output is
    deterministic for a fixed input set regardless of record order.
    """
    by_id = {r.id: r for r in records}
    if len(by_id) != len(records):
        raise ValueError("corpus contains duplicate record ids")
    uf = UnionFind()
    for r in records:
        if r.id in features:
            uf.find(r.id)
    for a, b in duplicate_pairs(records, features, config):
        uf.union(a, b)

    clusters: list[DuplicateCluster] = []
    for root, members in uf.components().items():
        canonical = min(members, key=lambda m: _canonical_key(by_id[m]))
        clusters.append(
            DuplicateCluster(
                cluster_id=min(members),
                member_ids=frozenset(members),
                canonical_id=canonical,
            )
        )
    for r in records:
        if r.id not in features:
            clusters.append(
                DuplicateCluster(
                    cluster_id=r.id,
                    member_ids=frozenset({r.id}),
                    canonical_id=r.id,
                    flagged=True,
                )
            )
    clusters.sort(key=lambda c: c.cluster_id)
    return clusters


def apply_clusters(records: Sequence[ImageRecord], clusters: Sequence[DuplicateCluster]) -> None:
    """Stamp each record with the id of its cluster."""
    owner = {m: c.cluster_id for c in clusters for m in c.member_ids}
    for r in records:
        r.cluster_id = owner.get(r.id)


def survivors(
    records: Sequence[ImageRecord], clusters: Sequence[DuplicateCluster]
) -> list[ImageRecord]:
    """The canonical record of every cluster, sorted by id."""
    by_id = {r.id: r for r in records}
    picked = [by_id[c.canonical_id] for c in clusters]
    picked.sort(key=lambda r: r.id)
    return picked


def write_cluster_report(path, clusters: Sequence[DuplicateCluster]) -> None:
    """CSV report: cluster_id,member_id,is_canonical."""
    with Path(path).open("w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f)
        writer.writerow(["cluster_id", "member_id", "is_canonical"])
        for cluster in sorted(clusters, key=lambda c: c.cluster_id):
            for member in sorted(cluster.member_ids):
                writer.writerow(
                    [cluster.cluster_id, member, str(member == cluster.canonical_id).lower()]
                )


def measure_throughput(
    method: str,
    images: Sequence[bytes],
    repetitions: int = 1,
    *,
    provider=None,
    config: Optional[DedupConfig] = None,
) -> list[ThroughputSample]:
    """Time feature extraction plus the pairwise duplicate scan.

    Returns one sample per repetition.  The embedding method requires a
    provider; thresholds default to a pragmatic config per method.
    """
    if not images:
        raise EmptyInputError("no images to measure")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if config is None:
        config = (
            DedupConfig(method="phash")
            if method == "phash"
            else DedupConfig(method="embedding", epsilon=0.95)
        )
    if config.method != method:
        raise ValueError("config method does not match requested method")
    if method == "embedding" and provider is None:
        raise ValueError("embedding throughput needs a provider")

    from .phash import phash64

    records = [
        ImageRecord(id=f"bench-{i:06d}", source=Source.CRAWLED, local_path="-")
        for i in range(len(images))
    ]
    samples = []
    for _ in range(repetitions):
        start = time.perf_counter()
        features: dict[str, Feature] = {}
        if method == "phash":
            for rec, data in zip(records, images):
                features[rec.id] = phash64(data)
        else:
            result = provider.encode_batch(list(images))
            for rec, vec in zip(records, result.vectors):
                if vec is not None:
                    features[rec.id] = vec
        for _pair in duplicate_pairs(records, features, config):
            pass
        elapsed = time.perf_counter() - start
        samples.append(
            ThroughputSample(
                method=method,
                images_processed=len(images),
                elapsed=elapsed,
                images_per_second=len(images) / elapsed,
            )
        )
    return samples
