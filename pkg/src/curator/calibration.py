"""Human-in-the-loop threshold calibration.

Raters judge stratified per-bucket samples (relevant to the region:
yes/no/not sure), top-scored duplicate pairs (binary), and 3-point Likert
items.  Their ratings feed per-bucket relevance, agreement statistics, and
a recommended retention boundary; the review HTTP server and browser UI
sit on top of these functions.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Iterable, Mapping, Optional, Sequence

import numpy as np

from .core import SCORED_BUCKETS, SimilarityBucket
from .errors import NoDataError, NoVotesError, PreconditionError
from .filtering import ScoredCorpus

LIKERT_MIN = 1
LIKERT_MAX = 3

RELEVANCE_CHOICES = ("yes", "no", "not_sure")

# Published baseline figures rendered beside locally measured numbers for
# context: precision of rated top-50 duplicate pairs and single-worker
# deduplication throughput, per encoder.
BASELINE_PRECISION_PCT = {
    "phash": 2.00,
    "clip-vit": 32.67,
    "nomic": 48.67,
    "siglip": 59.33,
}
BASELINE_THROUGHPUT_IPS = {
    "phash": 48.72,
    "clip-vit": 20.34,
    "nomic": 21.73,
    "siglip": 3.91,
}

# 3-point rubric rows shown to raters for each Likert dimension.
LIKERT_RUBRICS = {
    "likert_correctness": {
        3: "The caption correctly describes the given image.",
        2: "The caption somewhat correctly describes the given image.",
        1: "The caption is irrelevant to the image.",
    },
    "likert_naturalness": {
        3: "The caption seems to be naturally written by native speakers.",
        2: "The caption feels somewhat natural.",
        1: "The caption is unnatural and looks machine-generated.",
    },
}


class RatingTask(str, Enum):
    BUCKET_RELEVANCE = "bucket_relevance"
    DEDUP_PAIR = "dedup_pair"
    LIKERT_CORRECTNESS = "likert_correctness"
    LIKERT_NATURALNESS = "likert_naturalness"


LIKERT_TASKS = (RatingTask.LIKERT_CORRECTNESS, RatingTask.LIKERT_NATURALNESS)


@dataclass(frozen=True)
class RatingRecord:
    """One human judgment on one sampled item."""

    rater_id: str
    item_id: str
    task: RatingTask
    value: object
    timestamp: float = 0.0

    def __post_init__(self):
        task = RatingTask(self.task)
        object.__setattr__(self, "task", task)
        value = self.value
        if task is RatingTask.BUCKET_RELEVANCE:
            if value not in RELEVANCE_CHOICES:
                raise ValueError(f"relevance value must be one of {RELEVANCE_CHOICES}")
        elif task is RatingTask.DEDUP_PAIR:
            if not isinstance(value, bool):
                raise ValueError("dedup_pair value must be a boolean")
        else:
            if not (isinstance(value, int) and not isinstance(value, bool)):
                raise ValueError("likert value must be an integer")
            if not LIKERT_MIN <= value <= LIKERT_MAX:
                raise ValueError(
                    f"likert value must be in [{LIKERT_MIN}, {LIKERT_MAX}], got {value}"
                )


@dataclass(frozen=True)
class BucketRelevanceStat:
    """Relevance and agreement for one bucket's rated sample."""

    bucket: SimilarityBucket
    n_items: int
    relevance_pct: float
    agreement: Optional[float]

    def __post_init__(self):
        if not 0.0 <= self.relevance_pct <= 100.0:
            raise ValueError("relevance_pct must be in [0, 100]")
        if self.agreement is not None and not 0.0 <= self.agreement <= 1.0:
            raise ValueError("agreement must be in [0, 1]")


@dataclass(frozen=True)
class SampleSet:
    """Stratified sample: item ids per scored bucket, in sampled order."""

    per_bucket: Mapping[str, tuple[str, ...]]
    requested_per_bucket: int
    seed: int

    def all_items(self) -> list[str]:
        return [item for items in self.per_bucket.values() for item in items]

    def bucket_of(self, item_id: str) -> Optional[str]:
        for label, items in self.per_bucket.items():
            if item_id in items:
                return label
        return None

    @property
    def short_sampled(self) -> dict[str, int]:
        """Buckets that had fewer items than requested, with their actual size."""
        return {
            label: len(items)
            for label, items in self.per_bucket.items()
            if len(items) < self.requested_per_bucket
        }


def stratified_sample(
    scored: ScoredCorpus, n_per_bucket: int = 50, seed: int = 0
) -> SampleSet:
    """Draw up to n_per_bucket items from each scored bucket, reproducibly.

    Buckets are visited lowest to highest over one seeded generator, so the
    same (corpus, seed) yields the identical sample.  A bucket with fewer
    items than requested contributes everything it has.
    """
    if n_per_bucket < 1:
        raise ValueError("n_per_bucket must be >= 1")
    rng = np.random.default_rng(seed)
    grouped = scored.by_bucket()
    per_bucket: dict[str, tuple[str, ...]] = {}
    for bucket in SCORED_BUCKETS:
        entries = grouped.get(bucket.label, [])
        ids = sorted(e.record.id for e in entries)
        if not ids:
            per_bucket[bucket.label.value] = ()
            continue
        take = min(n_per_bucket, len(ids))
        picks = rng.choice(len(ids), size=take, replace=False)
        per_bucket[bucket.label.value] = tuple(ids[i] for i in picks)
    return SampleSet(
        per_bucket=per_bucket, requested_per_bucket=n_per_bucket, seed=seed
    )


def _group_by_item(
    ratings: Iterable[RatingRecord], task: Optional[RatingTask] = None
) -> dict[str, list[RatingRecord]]:
    grouped: dict[str, list[RatingRecord]] = {}
    for r in ratings:
        if task is not None and r.task is not task:
            continue
        grouped.setdefault(r.item_id, []).append(r)
    return grouped


def item_is_relevant(item_ratings: Sequence[RatingRecord]) -> bool:
    """Yes-majority with not_sure abstaining: strictly more yes than no."""
    yes = sum(1 for r in item_ratings if r.value == "yes")
    no = sum(1 for r in item_ratings if r.value == "no")
    return yes > no


def item_agreement(item_ratings: Sequence[RatingRecord]) -> Optional[float]:
    """Fraction of agreeing rating pairs for one item; None below two ratings."""
    n = len(item_ratings)
    if n < 2:
        return None
    values = [r.value for r in item_ratings]
    agree = sum(
        1
        for i in range(n)
        for j in range(i + 1, n)
        if values[i] == values[j]
    )
    return agree / (n * (n - 1) / 2)


def percent_agreement(ratings: Iterable[RatingRecord]) -> float:
    """Mean per-item pairwise agreement across multi-rated items.

    Items with a single rating contribute nothing; with no multi-rated
    items at all the statistic is vacuously 1.0.
    """
    per_item = [
        item_agreement(group)
        for group in _group_by_item(ratings).values()
    ]
    values = [v for v in per_item if v is not None]
    return float(np.mean(values)) if values else 1.0


def chance_corrected_agreement(ratings: Iterable[RatingRecord]) -> float:
    """Observed minus expected agreement over one minus expected.

    Expected agreement is the collision probability of the marginal label
    frequencies over ratings on multi-rated items.  Degenerate marginals
    (every rating identical) return 1.0.
    """
    multi = [
        r
        for group in _group_by_item(ratings).values()
        if len(group) >= 2
        for r in group
    ]
    if not multi:
        return 1.0
    counts: dict[object, int] = {}
    for r in multi:
        counts[r.value] = counts.get(r.value, 0) + 1
    total = len(multi)
    expected = sum((c / total) ** 2 for c in counts.values())
    observed = percent_agreement(multi)
    if expected >= 1.0:
        return 1.0
    return (observed - expected) / (1.0 - expected)


def agreement_needs_escalation(
    item_ratings: Sequence[RatingRecord], bound: float = 0.8
) -> bool:
    """True when exactly two raters judged the item and agree below the bound."""
    if len(item_ratings) != 2:
        return False
    agreement = item_agreement(item_ratings)
    return agreement is not None and agreement < bound


def unrated_items(ratings: Iterable[RatingRecord], sample: SampleSet) -> list[str]:
    """Sampled items that nobody has judged yet."""
    grouped = _group_by_item(ratings, RatingTask.BUCKET_RELEVANCE)
    return [item for item in sample.all_items() if item not in grouped]


def bucket_relevance(
    ratings: Iterable[RatingRecord], sample: SampleSet
) -> list[BucketRelevanceStat]:
    """Per-bucket relevance percentage and agreement over a rated sample.

    Sampled items with zero ratings are excluded (see unrated_items for
    the report); n_items counts rated items only.  Agreement is None for
    buckets with no multi-rated items.
    """
    grouped = _group_by_item(ratings, RatingTask.BUCKET_RELEVANCE)
    stats: list[BucketRelevanceStat] = []
    for bucket in SCORED_BUCKETS:
        items = [
            item
            for item in sample.per_bucket.get(bucket.label.value, ())
            if item in grouped
        ]
        if not items:
            stats.append(
                BucketRelevanceStat(
                    bucket=bucket, n_items=0, relevance_pct=0.0, agreement=None
                )
            )
            continue
        relevant = sum(1 for item in items if item_is_relevant(grouped[item]))
        per_item = [item_agreement(grouped[item]) for item in items]
        values = [v for v in per_item if v is not None]
        stats.append(
            BucketRelevanceStat(
                bucket=bucket,
                n_items=len(items),
                relevance_pct=100.0 * relevant / len(items),
                agreement=float(np.mean(values)) if values else None,
            )
        )
    return stats


@dataclass(frozen=True)
class ThresholdRecommendation:
    """A centi-score boundary plus the buckets that cleared the target."""

    boundary: float
    buckets: tuple[str, ...]
    warning: Optional[str] = None

    @property
    def rho(self) -> float:
        return self.boundary / 100.0


def recommend_threshold(
    stats: Sequence[BucketRelevanceStat], target_relevance_pct: float
) -> ThresholdRecommendation:
    """Pick the boundary of the longest top run of buckets meeting the target.

    Buckets are ordered by score; the recommendation is the lower bound of
    the lowest bucket in the longest suffix whose every bucket clears the
    target.  When no bucket clears it, the top bucket's lower bound is
    returned with a warning.  Stats must cover contiguous buckets.
    """
    ordered = sorted(stats, key=lambda s: s.bucket.lower)
    if not ordered:
        raise NoDataError("no bucket statistics to recommend from")
    for prev, nxt in zip(ordered, ordered[1:]):
        if prev.bucket.upper != nxt.bucket.lower:
            raise PreconditionError(
                f"bucket statistics not contiguous at {prev.bucket.label.value}"
            )
    suffix: list[BucketRelevanceStat] = []
    for stat in reversed(ordered):
        if stat.relevance_pct >= target_relevance_pct:
            suffix.append(stat)
        else:
            break
    if not suffix:
        top = ordered[-1]
        return ThresholdRecommendation(
            boundary=top.bucket.lower,
            buckets=(),
            warning=(
                f"no bucket reaches {target_relevance_pct:.0f}% relevance; "
                f"defaulting to the top bucket boundary {top.bucket.lower}"
            ),
        )
    suffix.reverse()
    return ThresholdRecommendation(
        boundary=suffix[0].bucket.lower,
        buckets=tuple(s.bucket.label.value for s in suffix),
    )


@dataclass(frozen=True)
class PairScore:
    """A candidate duplicate pair and its similarity score."""

    id_a: str
    id_b: str
    score: float

    def __post_init__(self):
        if self.id_a >= self.id_b:
            raise ValueError("pair ids must satisfy id_a < id_b")

    @property
    def item_id(self) -> str:
        return f"{self.id_a}|{self.id_b}"


def sample_top_pairs(scores: Iterable[PairScore], n: int = 50) -> list[PairScore]:
    """The n highest-scoring pairs; ties broken by (id_a, id_b)."""
    if n < 1:
        raise ValueError("n must be >= 1")
    ordered = sorted(scores, key=lambda p: (-p.score, p.id_a, p.id_b))
    return ordered[:n]


def pair_precision(
    pairs: Sequence[PairScore], ratings: Iterable[RatingRecord]
) -> float:
    """Fraction of sampled pairs a strict majority of raters confirmed."""
    if not pairs:
        raise NoVotesError("no pairs to score")
    grouped = _group_by_item(ratings, RatingTask.DEDUP_PAIR)
    confirmed = 0
    for pair in pairs:
        votes = grouped.get(pair.item_id, [])
        yes = sum(1 for r in votes if r.value is True)
        no = sum(1 for r in votes if r.value is False)
        if yes > no:
            confirmed += 1
    return confirmed / len(pairs)


def likert_summary(ratings: Iterable[RatingRecord], task: RatingTask) -> float:
    """Mean 3-point score for one Likert dimension."""
    task = RatingTask(task)
    if task not in LIKERT_TASKS:
        raise ValueError(f"{task.value} is not a Likert task")
    values = [r.value for r in ratings if r.task is task]
    if not values:
        raise NoVotesError(f"no ratings for task {task.value}")
    return float(np.mean(values))


def render_likert(mean: float) -> str:
    return f"{mean:.2f}"


def render_precision_report(measured_pct: Mapping[str, float]) -> str:
    """Measured precision beside the published baseline, one row per method."""
    lines = [f"{'method':<10}{'measured':>10}{'baseline':>10}"]
    for method in sorted(set(measured_pct) | set(BASELINE_PRECISION_PCT)):
        measured = measured_pct.get(method)
        baseline = BASELINE_PRECISION_PCT.get(method)
        lines.append(
            f"{method:<10}"
            f"{(f'{measured:.2f}%' if measured is not None else '-'):>10}"
            f"{(f'{baseline:.2f}%' if baseline is not None else '-'):>10}"
        )
    return "\n".join(lines)


def _rating_to_obj(r: RatingRecord) -> dict:
    return {
        "rater_id": r.rater_id,
        "item_id": r.item_id,
        "task": r.task.value,
        "value": r.value,
        "timestamp": r.timestamp,
    }


def _rating_from_obj(obj: Mapping) -> RatingRecord:
    task = RatingTask(obj["task"])
    value = obj["value"]
    if task in LIKERT_TASKS and isinstance(value, float) and value.is_integer():
        value = int(value)
    return RatingRecord(
        rater_id=obj["rater_id"],
        item_id=obj["item_id"],
        task=task,
        value=value,
        timestamp=float(obj.get("timestamp", 0.0)),
    )


class RatingStore:
    """Append-only newline-delimited rating log; single writer, many readers."""

    def __init__(self, path):
        self.path = Path(path)
        self._ratings: list[RatingRecord] = []
        if self.path.exists():
            for line in self.path.read_text(encoding="utf-8").splitlines():
                line = line.strip()
                if line:
                    self._ratings.append(_rating_from_obj(json.loads(line)))

    def __len__(self) -> int:
        return len(self._ratings)

    @property
    def ratings(self) -> list[RatingRecord]:
        return list(self._ratings)

    def append(self, rating: RatingRecord) -> None:
        with open(self.path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(_rating_to_obj(rating), sort_keys=True) + "\n")
        self._ratings.append(rating)

    def for_task(self, task: RatingTask) -> list[RatingRecord]:
        return [r for r in self._ratings if r.task is task]

    def rated_items(self, rater_id: str, task: RatingTask) -> set[str]:
        return {
            r.item_id
            for r in self._ratings
            if r.rater_id == rater_id and r.task is task
        }


def read_ratings(path) -> list[RatingRecord]:
    return RatingStore(path).ratings


def write_ratings(ratings: Iterable[RatingRecord], path) -> None:
    lines = [json.dumps(_rating_to_obj(r), sort_keys=True) for r in ratings]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")
