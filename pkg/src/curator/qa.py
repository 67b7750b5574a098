"""Crowd validation verdicts, escalation, and the contribution-point ledger.

Every vote carries the full three-field rubric: photo quality (ok or not),
relevance (1..5), and caption fit (yes/no/unsure).  Verdicts are pure
recomputations from a vote snapshot; the vote store and ledger are
single-writer, many-reader.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import NoVotesError, UnknownCountryError

CAPTION_CHOICES = ("yes", "no", "unsure")

# Per-image submission points by country; validation is 1 point per act.
IMAGE_POINTS = {
    "ID": 2, "SG": 2, "PH": 2,
    "TH": 3, "MY": 3, "VN": 3,
    "BN": 4, "LA": 4, "KH": 4, "MM": 4, "TL": 4,
}
VALIDATION_POINTS = 1
CO_AUTHOR_THRESHOLD = 200

RELEVANCE_PASS_BOUND = 3
ESCALATION_AGREEMENT_BOUND = 0.8


@dataclass(frozen=True)
class ValidationVote:
    """One validator's full rubric judgment on one image."""

    validator_id: str
    image_id: str
    photo_quality_ok: bool
    relevance: int
    caption_fits: str
    pii_flag: bool = False

    def __post_init__(self):
        if not 1 <= self.relevance <= 5:
            raise ValueError(f"relevance must be in [1, 5], got {self.relevance}")
        if self.caption_fits not in CAPTION_CHOICES:
            raise ValueError(f"caption_fits must be one of {CAPTION_CHOICES}")


@dataclass(frozen=True)
class QAVerdict:
    """Aggregated tri-state outcome for one image.

    Each metric is True (passes with enough validators), None (pending:
    passes but under-validated, or not evaluable), or False (fails).
    """

    image_id: str
    quality: Optional[bool]
    caption: Optional[bool]
    relevance: Optional[bool]
    overall: Optional[bool]
    n_validators: int
    averages: dict[str, float]
    pii_flagged: bool = False


def _tri(passed: bool, n_validators: int) -> Optional[bool]:
    if not passed:
        return False
    return True if n_validators >= 2 else None


def aggregate_verdict(votes: Sequence[ValidationVote]) -> QAVerdict:
    """Fold one image's votes into a QAVerdict.

    Photo quality and caption fit map to 1.0/0.0 (unsure excluded from the
    caption average); passing means average > 0.5.  Relevance passes at
    average >= 3.  A passing metric is True only with >= 2 validators,
    otherwise None.  All-unsure captions are not evaluable: average NaN,
    tri-state None.
    """
    if not votes:
        raise NoVotesError("cannot aggregate zero votes")
    image_ids = {v.image_id for v in votes}
    if len(image_ids) != 1:
        raise ValueError(f"votes span multiple images: {sorted(image_ids)}")
    validators = [v.validator_id for v in votes]
    if len(set(validators)) != len(validators):
        raise ValueError("duplicate validator for image")

    n = len(votes)
    avg_quality = sum(1.0 if v.photo_quality_ok else 0.0 for v in votes) / n
    avg_relevance = sum(v.relevance for v in votes) / n
    caption_scores = [
        1.0 if v.caption_fits == "yes" else 0.0
        for v in votes
        if v.caption_fits != "unsure"
    ]
    avg_caption = (
        sum(caption_scores) / len(caption_scores) if caption_scores else math.nan
    )

    quality = _tri(avg_quality > 0.5, n)
    relevance = _tri(avg_relevance >= RELEVANCE_PASS_BOUND, n)
    caption = None if not caption_scores else _tri(avg_caption > 0.5, n)

    metrics = (quality, caption, relevance)
    if any(m is False for m in metrics):
        overall = False
    elif all(m is True for m in metrics):
        overall = True
    else:
        overall = None

    return QAVerdict(
        image_id=votes[0].image_id,
        quality=quality,
        caption=caption,
        relevance=relevance,
        overall=overall,
        n_validators=n,
        averages={
            "photo_quality": avg_quality,
            "relevance": avg_relevance,
            "caption_fit": avg_caption,
        },
        pii_flagged=any(v.pii_flag for v in votes),
    )


def _vote_fields(vote: ValidationVote) -> tuple[bool, bool, str]:
    # Relevance binarized at the pass bound so "4 vs 5" counts as agreement.
    return (
        vote.photo_quality_ok,
        vote.relevance >= RELEVANCE_PASS_BOUND,
        vote.caption_fits,
    )


def vote_field_agreement(a: ValidationVote, b: ValidationVote) -> float:
    """Fraction of the three rubric fields on which two votes agree."""
    fa, fb = _vote_fields(a), _vote_fields(b)
    return sum(x == y for x, y in zip(fa, fb)) / 3.0


def needs_escalation(votes: Sequence[ValidationVote]) -> bool:
    """True when exactly two validators agree on fewer than 80% of fields.

    With one vote there is nothing to compare; with three or more the
    extra validator is already present, so no further escalation.
    """
    if len(votes) != 2:
        return False
    return vote_field_agreement(votes[0], votes[1]) < ESCALATION_AGREEMENT_BOUND


def group_votes(votes: Iterable[ValidationVote]) -> dict[str, list[ValidationVote]]:
    grouped: dict[str, list[ValidationVote]] = {}
    for vote in votes:
        grouped.setdefault(vote.image_id, []).append(vote)
    return {image_id: grouped[image_id] for image_id in sorted(grouped)}


def verdicts_for(votes: Iterable[ValidationVote]) -> list[QAVerdict]:
    return [aggregate_verdict(group) for group in group_votes(votes).values()]


def redaction_queue(votes: Iterable[ValidationVote]) -> list[str]:
    """Images any validator flagged for PII, regardless of verdict."""
    return sorted({v.image_id for v in votes if v.pii_flag})


def image_points(country: str) -> int:
    """Points for one submitted image from one country."""
    try:
        return IMAGE_POINTS[country]
    except KeyError:
        raise UnknownCountryError(f"no point value for country {country!r}") from None


def image_points_for_regions(regions: Iterable[str]) -> int:
    """Multi-region images score at their maximum-point region."""
    values = [image_points(r) for r in regions]
    if not values:
        raise ValueError("image has no regions")
    return max(values)


@dataclass(frozen=True)
class Activity:
    """One creditable act: an image submission, a validation, or assigned points."""

    kind: str
    regions: frozenset[str] = frozenset()
    points: int = 0

    @staticmethod
    def image(*regions: str) -> "Activity":
        return Activity(kind="image", regions=frozenset(regions))

    @staticmethod
    def validation() -> "Activity":
        return Activity(kind="validation")

    @staticmethod
    def assigned(points: int) -> "Activity":
        if points < 0:
            raise ValueError("assigned points must be non-negative")
        return Activity(kind="assigned", points=points)


@dataclass
class ContributorPoints:
    image_points: int = 0
    validation_points: int = 0
    assigned_points: int = 0

    @property
    def total(self) -> int:
        return self.image_points + self.validation_points + self.assigned_points


@dataclass
class ContributionLedger:
    contributors: dict[str, ContributorPoints] = field(default_factory=dict)
    co_author_threshold: int = CO_AUTHOR_THRESHOLD

    def totals(self) -> dict[str, int]:
        return {name: cp.total for name, cp in self.contributors.items()}


def award(ledger: ContributionLedger, contributor: str, activity: Activity) -> ContributionLedger:
    """Credit one activity to one contributor; returns the same ledger."""
    entry = ledger.contributors.setdefault(contributor, ContributorPoints())
    if activity.kind == "image":
        entry.image_points += image_points_for_regions(activity.regions)
    elif activity.kind == "validation":
        entry.validation_points += VALIDATION_POINTS
    elif activity.kind == "assigned":
        entry.assigned_points += activity.points
    else:
        raise ValueError(f"unknown activity kind {activity.kind!r}")
    return ledger


def authorship_order(ledger: ContributionLedger) -> list[str]:
    """All contributors, highest total first; ties broken by id."""
    return sorted(ledger.contributors, key=lambda c: (-ledger.contributors[c].total, c))


def co_authors(ledger: ContributionLedger) -> list[str]:
    """Contributors at or above the co-author threshold, in authorship order."""
    return [
        c
        for c in authorship_order(ledger)
        if ledger.contributors[c].total >= ledger.co_author_threshold
    ]


def read_votes(path) -> list[ValidationVote]:
    """Load a newline-delimited vote store; duplicate (validator, image) pairs are an error."""
    votes: list[ValidationVote] = []
    seen: set[tuple[str, str]] = set()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        vote = ValidationVote(
            validator_id=obj["validator_id"],
            image_id=obj["image_id"],
            photo_quality_ok=bool(obj["photo_quality_ok"]),
            relevance=int(obj["relevance"]),
            caption_fits=obj["caption_fits"],
            pii_flag=bool(obj.get("pii_flag", False)),
        )
        key = (vote.validator_id, vote.image_id)
        if key in seen:
            raise ValueError(f"duplicate vote for {key}")
        seen.add(key)
        votes.append(vote)
    return votes


def write_votes(votes: Iterable[ValidationVote], path) -> None:
    lines = [
        json.dumps(
            {
                "validator_id": v.validator_id,
                "image_id": v.image_id,
                "photo_quality_ok": v.photo_quality_ok,
                "relevance": v.relevance,
                "caption_fits": v.caption_fits,
                "pii_flag": v.pii_flag,
            },
            sort_keys=True,
        )
        for v in votes
    ]
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_ledger(path) -> ContributionLedger:
    """Replay a newline-delimited activity log into a ledger."""
    ledger = ContributionLedger()
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        obj = json.loads(line)
        kind = obj["activity"]
        if kind == "image":
            activity = Activity.image(*obj["regions"])
        elif kind == "validation":
            activity = Activity.validation()
        elif kind == "assigned":
            activity = Activity.assigned(int(obj["points"]))
        else:
            raise ValueError(f"unknown activity kind {kind!r}")
        award(ledger, obj["contributor"], activity)
    return ledger


def _verdict_word(value: Optional[bool]) -> str:
    if value is True:
        return "pass"
    if value is False:
        return "fail"
    return "pending"


def write_verdict_report(votes: Iterable[ValidationVote], path) -> list[QAVerdict]:
    """Write one CSV row per image: averages, tri-states, escalation, PII."""
    grouped = group_votes(votes)
    verdicts = [aggregate_verdict(group) for group in grouped.values()]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "image_id",
                "n_validators",
                "avg_photo_quality",
                "avg_relevance",
                "avg_caption_fit",
                "quality",
                "caption",
                "relevance",
                "overall",
                "escalate",
                "pii_flagged",
            ]
        )
        for v in verdicts:
            avg_caption = v.averages["caption_fit"]
            writer.writerow(
                [
                    v.image_id,
                    v.n_validators,
                    f"{v.averages['photo_quality']:.4f}",
                    f"{v.averages['relevance']:.4f}",
                    "" if math.isnan(avg_caption) else f"{avg_caption:.4f}",
                    _verdict_word(v.quality),
                    _verdict_word(v.caption),
                    _verdict_word(v.relevance),
                    _verdict_word(v.overall),
                    "true" if needs_escalation(grouped[v.image_id]) else "false",
                    "true" if v.pii_flagged else "false",
                ]
            )
    return verdicts
