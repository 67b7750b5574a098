"""End-to-end orchestration: ingest, embed, filter, calibrate, dedup,
survivors, reports.

Each stage writes a checkpoint (JSON payload plus a hash of the config)
under the output directory; a rerun with the same config skips completed
stages, so a run killed mid-pipeline resumes instead of restarting.  All
randomness flows from the one seed in the config, and reports never embed
wall-clock values, so equal inputs produce byte-identical reports.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .calibration import (
    bucket_relevance,
    read_ratings,
    recommend_threshold,
    stratified_sample,
)
from .corpus import images_dir, load_corpus, save_corpus
from .dedup import (
    DedupConfig,
    DuplicateCluster,
    dedup_corpus,
    apply_clusters,
    write_cluster_report,
)
from .embedding import EmbeddingProvider, ProviderConfig
from .errors import PreconditionError
from .filtering import (
    FilterConfig,
    filter_corpus,
    load_reference,
    render_retention_text,
    scored_from_records,
    threshold_sweep,
    write_retention_csv,
)
from .ingest import fetch_images, load_manifest
from .phash import phash64_file
from .qa import read_votes, verdicts_for

STAGES = ("ingest", "embed", "filter", "calibrate", "dedup")
REPORT_FORMATS = ("csv", "text")


@dataclass(frozen=True)
class PipelineConfig:
    """One config drives the whole run; sections mirror the stages."""

    seed: int = 0
    stages: tuple[str, ...] = STAGES
    output_dir: str = "out"
    # ingest
    manifest: Optional[str] = None
    corpus_dir: str = "corpus"
    parallelism: int = 8
    timeout: float = 30.0
    max_bytes: int = 20 * 1024 * 1024
    # embed
    backend: str = "deterministic"
    dims: int = 64
    cache_dir: str = "cache"
    endpoint: Optional[str] = None
    batch_size: int = 32
    # filter
    rho: float = 0.545
    prefilter_floor: float = 0.515
    reference_path: Optional[str] = None
    total_count: Optional[int] = None
    # calibrate
    per_bucket: int = 50
    target_relevance_pct: float = 85.0
    ratings_path: Optional[str] = None
    # dedup
    method: str = "embedding"
    epsilon: Optional[float] = 0.95
    max_hamming: int = 16
    exact: Optional[bool] = None
    # reports
    votes_path: Optional[str] = None
    report_formats: tuple[str, ...] = REPORT_FORMATS

    def __post_init__(self):
        unknown = set(self.stages) - set(STAGES)
        if unknown:
            raise ValueError(f"unknown stages: {sorted(unknown)}")
        unknown = set(self.report_formats) - set(REPORT_FORMATS)
        if unknown:
            raise ValueError(f"unknown report formats: {sorted(unknown)}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "stages": list(self.stages),
            "output_dir": self.output_dir,
            "manifest": self.manifest,
            "corpus_dir": self.corpus_dir,
            "parallelism": self.parallelism,
            "timeout": self.timeout,
            "max_bytes": self.max_bytes,
            "backend": self.backend,
            "dims": self.dims,
            "cache_dir": self.cache_dir,
            "endpoint": self.endpoint,
            "batch_size": self.batch_size,
            "rho": self.rho,
            "prefilter_floor": self.prefilter_floor,
            "reference_path": self.reference_path,
            "total_count": self.total_count,
            "per_bucket": self.per_bucket,
            "target_relevance_pct": self.target_relevance_pct,
            "ratings_path": self.ratings_path,
            "method": self.method,
            "epsilon": self.epsilon,
            "max_hamming": self.max_hamming,
            "exact": self.exact,
            "votes_path": self.votes_path,
            "report_formats": list(self.report_formats),
        }

    def config_hash(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


_INI_LAYOUT = {
    "pipeline": ("seed", "stages", "output_dir"),
    "ingest": ("manifest", "corpus_dir", "parallelism", "timeout", "max_bytes"),
    "embed": ("backend", "dims", "cache_dir", "endpoint", "batch_size"),
    "filter": ("rho", "prefilter_floor", "reference_path", "total_count"),
    "calibrate": ("per_bucket", "target_relevance_pct", "ratings_path"),
    "dedup": ("method", "epsilon", "max_hamming", "exact"),
    "reports": ("votes_path", "report_formats"),
}

_INT_KEYS = {
    "seed", "parallelism", "max_bytes", "dims", "batch_size",
    "per_bucket", "max_hamming", "total_count",
}
_FLOAT_KEYS = {"timeout", "rho", "prefilter_floor", "target_relevance_pct", "epsilon"}
_BOOL_KEYS = {"exact"}
_TUPLE_KEYS = {"stages", "report_formats"}


def _coerce(key: str, raw: str):
    raw = raw.strip()
    if raw == "":
        return None
    if key in _INT_KEYS:
        return int(raw)
    if key in _FLOAT_KEYS:
        return float(raw)
    if key in _BOOL_KEYS:
        return raw.lower() in ("1", "true", "yes", "on")
    if key in _TUPLE_KEYS:
        return tuple(part.strip() for part in raw.split(",") if part.strip())
    return raw


def load_config(path=None, overrides: Sequence[str] = ()) -> PipelineConfig:
    """Build a PipelineConfig from an INI file plus section.key=value overrides."""
    parser = configparser.ConfigParser()
    if path is not None:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    for override in overrides:
        key, sep, value = override.partition("=")
        if not sep:
            raise ValueError(f"override {override!r} is not section.key=value")
        section, dot, option = key.strip().lstrip("-").partition(".")
        if not dot:
            raise ValueError(f"override key {key!r} is not section.key")
        if not parser.has_section(section):
            parser.add_section(section)
        parser.set(section, option.strip(), value.strip())

    kwargs = {}
    for section, keys in _INI_LAYOUT.items():
        if not parser.has_section(section):
            continue
        for key in keys:
            if parser.has_option(section, key):
                value = _coerce(key, parser.get(section, key))
                if value is not None:
                    kwargs[key] = value
        for option in parser.options(section):
            if option not in keys:
                raise ValueError(f"unknown key {section}.{option}")
    for section in parser.sections():
        if section not in _INI_LAYOUT:
            raise ValueError(f"unknown config section [{section}]")
    return PipelineConfig(**kwargs)


@dataclass(frozen=True)
class RunSummary:
    """Per-stage counts for one pipeline run."""

    ingested: int
    fetched: int
    scored: int
    retained: int
    clusters: int
    survivors: int

    def __post_init__(self):
        chain = (self.survivors, self.retained, self.fetched, self.ingested)
        for smaller, larger in zip(chain, chain[1:]):
            if smaller > larger:
                raise ValueError(f"stage counts not monotone: {self.to_dict()}")

    def to_dict(self) -> dict:
        return {
            "ingested": self.ingested,
            "fetched": self.fetched,
            "scored": self.scored,
            "retained": self.retained,
            "clusters": self.clusters,
            "survivors": self.survivors,
        }


class _Checkpoints:
    """Per-stage JSON snapshots, invalidated when the config changes."""

    def __init__(self, output_dir: Path, config_hash: str):
        self.dir = output_dir / "checkpoints"
        self.dir.mkdir(parents=True, exist_ok=True)
        self.config_hash = config_hash

    def path(self, stage: str) -> Path:
        return self.dir / f"{stage}.json"

    def load(self, stage: str) -> Optional[dict]:
        path = self.path(stage)
        if not path.exists():
            return None
        obj = json.loads(path.read_text(encoding="utf-8"))
        if obj.get("config_hash") != self.config_hash:
            return None
        return obj["payload"]

    def save(self, stage: str, payload: dict) -> None:
        obj = {"stage": stage, "config_hash": self.config_hash, "payload": payload}
        tmp = self.path(stage).with_suffix(".tmp")
        tmp.write_text(json.dumps(obj, sort_keys=True, indent=1), encoding="utf-8")
        tmp.replace(self.path(stage))


def _build_provider(config: PipelineConfig) -> EmbeddingProvider:
    provider_config = ProviderConfig(
        backend=config.backend,
        dims=config.dims,
        cache_dir=config.cache_dir,
        endpoint=config.endpoint,
        batch_size=config.batch_size,
    )
    return EmbeddingProvider(provider_config)


def _reference_set(config: PipelineConfig, provider: EmbeddingProvider):
    if config.reference_path is None:
        raise PreconditionError("filter stage enabled but no reference_path configured")
    return load_reference(config.reference_path)


def _stage_ingest(config: PipelineConfig, checkpoints: _Checkpoints) -> dict:
    payload = checkpoints.load("ingest")
    if payload is not None:
        return payload
    if config.manifest is None:
        raise PreconditionError("ingest stage enabled but no manifest configured")
    loaded = load_manifest(config.manifest)
    # Re-fetch tolerates partial prior runs: records with bytes are skipped.
    corpus_path = Path(config.corpus_dir) / "records.jsonl"
    if corpus_path.exists():
        existing = {r.id: r for r in load_corpus(config.corpus_dir)}
        for record in loaded.records:
            prior = existing.get(record.id)
            if prior is not None and prior.local_path:
                record.local_path = prior.local_path
    report = fetch_images(
        loaded.records,
        images_dir(config.corpus_dir),
        parallelism=config.parallelism,
        timeout=config.timeout,
        max_bytes=config.max_bytes,
    )
    save_corpus(loaded.records, config.corpus_dir)
    fetched = sum(1 for r in loaded.records if r.local_path)
    payload = {
        "ingested": len(loaded.records),
        "skipped_lines": loaded.skipped,
        "fetched": fetched,
        "failed_by_cause": report.failed_by_cause,
    }
    checkpoints.save("ingest", payload)
    return payload


def _stage_embed(
    config: PipelineConfig, checkpoints: _Checkpoints, provider: EmbeddingProvider
) -> dict:
    payload = checkpoints.load("embed")
    if payload is not None:
        return payload
    records = load_corpus(config.corpus_dir)
    blobs = []
    ids = []
    for record in records:
        if record.local_path and Path(record.local_path).exists():
            blobs.append(Path(record.local_path).read_bytes())
            ids.append(record.id)
    result = provider.encode_batch(blobs)
    failed = sorted(ids[i] for i in result.errors)
    payload = {"embedded": len(blobs) - len(result.errors), "failed": failed}
    checkpoints.save("embed", payload)
    return payload


def _stage_filter(
    config: PipelineConfig, checkpoints: _Checkpoints, provider: EmbeddingProvider
) -> dict:
    payload = checkpoints.load("filter")
    if payload is not None:
        return payload
    records = load_corpus(config.corpus_dir)
    reference = _reference_set(config, provider)
    filter_config = FilterConfig(
        rho=config.rho, reference=reference, prefilter_floor=config.prefilter_floor
    )
    scored = filter_corpus(records, provider, filter_config)
    save_corpus(records, config.corpus_dir)
    payload = {
        "scored": scored.total_scored,
        "stored": len(scored.entries),
        "below_floor": scored.below_floor,
        "unscored": list(scored.unscored),
        "retained": len(scored.retained_ids()),
    }
    checkpoints.save("filter", payload)
    return payload


def _stage_calibrate(config: PipelineConfig, checkpoints: _Checkpoints) -> dict:
    payload = checkpoints.load("calibrate")
    if payload is not None:
        return payload
    records = load_corpus(config.corpus_dir)
    scored = scored_from_records(records)
    sample = stratified_sample(scored, n_per_bucket=config.per_bucket, seed=config.seed)
    payload = {
        "sample": {label: list(items) for label, items in sample.per_bucket.items()},
        "recommended_boundary": None,
        "recommended_buckets": [],
        "warning": None,
    }
    if config.ratings_path and Path(config.ratings_path).exists():
        ratings = read_ratings(config.ratings_path)
        stats = bucket_relevance(ratings, sample)
        recommendation = recommend_threshold(stats, config.target_relevance_pct)
        payload["recommended_boundary"] = recommendation.boundary
        payload["recommended_buckets"] = list(recommendation.buckets)
        payload["warning"] = recommendation.warning
    checkpoints.save("calibrate", payload)
    return payload


def _dedup_features(
    config: PipelineConfig, records, provider: EmbeddingProvider
) -> dict:
    features = {}
    if config.method == "phash":
        for record in records:
            if record.local_path and Path(record.local_path).exists():
                features[record.id] = phash64_file(record.local_path)
    else:
        blobs, ids = [], []
        for record in records:
            if record.local_path and Path(record.local_path).exists():
                blobs.append(Path(record.local_path).read_bytes())
                ids.append(record.id)
        result = provider.encode_batch(blobs)
        for i, record_id in enumerate(ids):
            if result.vectors[i] is not None:
                features[record_id] = result.vectors[i]
    return features


def _retained_records(config: PipelineConfig, records):
    if "filter" in config.stages:
        filtered = [
            r
            for r in records
            if r.similarity_score is not None and r.similarity_score >= config.rho
        ]
        return sorted(filtered, key=lambda r: r.id)
    return sorted(
        (r for r in records if r.local_path), key=lambda r: r.id
    )


def _stage_dedup(
    config: PipelineConfig, checkpoints: _Checkpoints, provider: EmbeddingProvider
) -> dict:
    payload = checkpoints.load("dedup")
    if payload is not None:
        return payload
    records = load_corpus(config.corpus_dir)
    retained = _retained_records(config, records)
    dedup_config = DedupConfig(
        method=config.method,
        epsilon=config.epsilon,
        max_hamming=config.max_hamming,
        exact=config.exact,
    )
    features = _dedup_features(config, retained, provider)
    clusters = dedup_corpus(retained, features, dedup_config)
    apply_clusters(records, clusters)
    save_corpus(records, config.corpus_dir)
    payload = {
        "clusters": [
            {
                "cluster_id": c.cluster_id,
                "members": sorted(c.member_ids),
                "canonical": c.canonical_id,
                "flagged": c.flagged,
            }
            for c in clusters
        ],
        "n_clusters": len(clusters),
    }
    checkpoints.save("dedup", payload)
    return payload


def run_pipeline(config: PipelineConfig) -> RunSummary:
    """Execute the enabled stages in order and write reports.

    A failed stage leaves earlier checkpoints intact; rerunning with the
    same config resumes after the last completed stage.
    """
    output_dir = Path(config.output_dir)
    reports_dir = output_dir / "reports"
    reports_dir.mkdir(parents=True, exist_ok=True)
    checkpoints = _Checkpoints(output_dir, config.config_hash())
    provider = _build_provider(config)

    counts = {
        "ingested": 0,
        "fetched": 0,
        "scored": 0,
        "retained": 0,
        "clusters": 0,
        "survivors": 0,
    }

    if "ingest" in config.stages:
        ingest_payload = _stage_ingest(config, checkpoints)
        counts["ingested"] = ingest_payload["ingested"]
        counts["fetched"] = ingest_payload["fetched"]
    else:
        records = load_corpus(config.corpus_dir)
        counts["ingested"] = len(records)
        counts["fetched"] = sum(1 for r in records if r.local_path)

    if "embed" in config.stages:
        _stage_embed(config, checkpoints, provider)

    if "filter" in config.stages:
        filter_payload = _stage_filter(config, checkpoints, provider)
        counts["scored"] = filter_payload["scored"]
        counts["retained"] = filter_payload["retained"]
    else:
        counts["scored"] = counts["fetched"]
        counts["retained"] = counts["fetched"]

    if "calibrate" in config.stages:
        calibrate_payload = _stage_calibrate(config, checkpoints)
    else:
        calibrate_payload = None

    records = load_corpus(config.corpus_dir)
    retained = _retained_records(config, records)

    if "dedup" in config.stages:
        dedup_payload = _stage_dedup(config, checkpoints, provider)
        counts["clusters"] = dedup_payload["n_clusters"]
        canonical_ids = {c["canonical"] for c in dedup_payload["clusters"]}
        records = load_corpus(config.corpus_dir)
        final = sorted(
            (r for r in records if r.id in canonical_ids), key=lambda r: r.id
        )
    else:
        dedup_payload = None
        counts["clusters"] = len(retained)
        final = retained

    counts["survivors"] = len(final)
    save_corpus(final, output_dir / "survivors")

    summary = RunSummary(**counts)
    _write_reports(
        config, reports_dir, summary, records, dedup_payload, calibrate_payload
    )
    return summary


def _write_reports(
    config: PipelineConfig,
    reports_dir: Path,
    summary: RunSummary,
    records,
    dedup_payload,
    calibrate_payload,
) -> None:
    scored = scored_from_records(records)
    total = config.total_count if config.total_count is not None else summary.ingested
    total = max(total, scored.total_scored)
    table = threshold_sweep(scored, total)
    if "csv" in config.report_formats:
        write_retention_csv(reports_dir / "retention.csv", table)
    if "text" in config.report_formats:
        (reports_dir / "retention.txt").write_text(
            render_retention_text(table) + "\n", encoding="utf-8"
        )

    if dedup_payload is not None and "csv" in config.report_formats:
        clusters = [
            DuplicateCluster(
                cluster_id=c["cluster_id"],
                member_ids=frozenset(c["members"]),
                canonical_id=c["canonical"],
                flagged=c["flagged"],
            )
            for c in dedup_payload["clusters"]
        ]
        write_cluster_report(reports_dir / "clusters.csv", clusters)

    if calibrate_payload is not None:
        (reports_dir / "calibration.json").write_text(
            json.dumps(calibrate_payload, sort_keys=True, indent=1) + "\n",
            encoding="utf-8",
        )

    if config.votes_path and Path(config.votes_path).exists():
        votes = read_votes(config.votes_path)
        rows = dataset_stats(records, verdicts_for(votes))
        if "csv" in config.report_formats:
            write_stats_csv(reports_dir / "stats.csv", rows)
        if "text" in config.report_formats:
            (reports_dir / "stats.txt").write_text(
                render_stats_text(rows) + "\n", encoding="utf-8"
            )

    (reports_dir / "summary.json").write_text(
        json.dumps(summary.to_dict(), sort_keys=True, indent=1) + "\n",
        encoding="utf-8",
    )


@dataclass(frozen=True)
class RegionStats:
    """Per-region acceptance and relevance aggregates."""

    region: str
    accepted: int
    validators_per_image: float
    relevance_mean: float
    relevance_median: float
    relevance_std: float


def dataset_stats(records, verdicts) -> list[RegionStats]:
    """Aggregate accepted images per region from records plus QA verdicts.

    An image counts toward every region it is tagged with; the ALL row
    counts each image once.  Relevance aggregates use each image's mean
    validator relevance; population standard deviation.
    """
    by_id = {v.image_id: v for v in verdicts}
    accepted = [
        r for r in records if by_id.get(r.id) is not None and by_id[r.id].overall is True
    ]
    region_map: dict[str, list] = {}
    for record in accepted:
        verdict = by_id[record.id]
        for region in sorted(record.regions) or ["??"]:
            region_map.setdefault(region, []).append(verdict)

    def row(region: str, group) -> RegionStats:
        relevance = np.array([v.averages["relevance"] for v in group], dtype=np.float64)
        n_validators = np.array([v.n_validators for v in group], dtype=np.float64)
        return RegionStats(
            region=region,
            accepted=len(group),
            validators_per_image=float(n_validators.mean()),
            relevance_mean=float(relevance.mean()),
            relevance_median=float(np.median(relevance)),
            relevance_std=float(relevance.std()),
        )

    rows = [row(region, group) for region, group in sorted(region_map.items())]
    if accepted:
        rows.append(row("ALL", [by_id[r.id] for r in accepted]))
    return rows


def write_stats_csv(path, rows: Sequence[RegionStats]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            [
                "region",
                "accepted",
                "validators_per_image",
                "relevance_mean",
                "relevance_median",
                "relevance_std",
            ]
        )
        for r in rows:
            writer.writerow(
                [
                    r.region,
                    r.accepted,
                    f"{r.validators_per_image:.2f}",
                    f"{r.relevance_mean:.2f}",
                    f"{r.relevance_median:.2f}",
                    f"{r.relevance_std:.2f}",
                ]
            )


def render_stats_text(rows: Sequence[RegionStats]) -> str:
    header = (
        f"{'Region':<8}{'Accepted':>10}{'Val/img':>9}"
        f"{'RelMean':>9}{'RelMed':>8}{'RelStd':>8}"
    )
    lines = [header]
    for r in rows:
        lines.append(
            f"{r.region:<8}{r.accepted:>10}{r.validators_per_image:>9.2f}"
            f"{r.relevance_mean:>9.2f}{r.relevance_median:>8.2f}{r.relevance_std:>8.2f}"
        )
    return "\n".join(lines)
