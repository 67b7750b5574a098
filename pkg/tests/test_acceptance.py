"""Release checklist: one test per acceptance criterion, at stated tolerances.

Each test is self-contained and checks the library against independent
straight-line oracles or frozen published numbers.  Runtime bounds are
asserted where the criterion carries one.
"""

import io
import itertools
import json
import math
import time

import numpy as np
import pytest
from PIL import Image

import curator.pipeline as pipeline_module
from curator.calibration import BucketRelevanceStat, recommend_threshold
from curator.core import (
    BucketLabel,
    EmbeddingVector,
    PerceptualHash,
    ReferenceSet,
    SCORED_BUCKETS,
    Source,
    hamming,
)
from curator.dedup import DedupConfig, dedup_corpus, measure_throughput
from curator.embedding import EmbeddingProvider, ProviderConfig
from curator.filtering import (
    FilterConfig,
    filter_corpus,
    retention_table,
    save_reference,
    score_embeddings,
)
from curator.phash import phash64
from curator.pipeline import PipelineConfig, run_pipeline
from curator.qa import (
    Activity,
    ContributionLedger,
    IMAGE_POINTS,
    ValidationVote,
    aggregate_verdict,
    award,
    co_authors,
    image_points,
)

from conftest import make_record, noise_png, random_unit, recompress_jpeg, smooth_png
from oracles import (
    naive_canonical,
    naive_clusters,
    naive_mean_similarity,
    naive_phash,
    naive_retained,
    naive_verdict,
)


def flip_bits(bits, rng, n_flips):
    for pos in rng.choice(64, size=n_flips, replace=False):
        bits ^= 1 << int(pos)
    return bits


def planted_corpus(rng, n, method, dims=12):
    """Groups of 1..4 records sharing a perturbed base feature."""
    records, features, raw = [], {}, {}
    while len(records) < n:
        if method == "phash":
            base = int(rng.integers(0, 1 << 64, dtype=np.uint64))
        else:
            base = random_unit(rng, dims)
        for _ in range(int(rng.integers(1, 5))):
            if len(records) >= n:
                break
            rid = f"img-{len(records):04d}"
            source = Source.CROWDSOURCED if rng.random() < 0.3 else Source.CRAWLED
            records.append(make_record(rid, source=source))
            if method == "phash":
                bits = flip_bits(base, rng, int(rng.integers(0, 12)))
                features[rid] = PerceptualHash(bits)
                raw[rid] = bits
            else:
                sigma = float(rng.choice([0.02, 0.3]))
                vec = base + rng.normal(0.0, sigma, dims)
                features[rid] = EmbeddingVector(vec / np.linalg.norm(vec))
                raw[rid] = features[rid].values
    return records, features, raw


def test_criterion_01_mean_similarity_filter_matches_bruteforce(tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(410)
    provider = EmbeddingProvider(
        ProviderConfig(
            backend="deterministic", dims=32, cache_dir=str(tmp_path / "cache")
        )
    )
    records = []
    for i in range(200):
        path = tmp_path / f"img-{i:03d}.png"
        path.write_bytes(noise_png(rng, 8))
        records.append(make_record(f"img-{i:03d}", local_path=path))
    ref_vectors = provider.encode_batch(
        [noise_png(rng, 8) for _ in range(10)]
    ).vectors
    reference = ReferenceSet(embeddings=tuple(ref_vectors), provenance="acceptance")

    blobs = [path.read_bytes() for path in sorted(tmp_path.glob("img-*.png"))]
    vectors = provider.encode_batch(blobs).vectors
    ref_raw = [v.values for v in ref_vectors]
    oracle_scores = {
        record.id: naive_mean_similarity(vector.values, ref_raw)
        for record, vector in zip(records, vectors)
    }
    lo, hi = min(oracle_scores.values()), max(oracle_scores.values())
    for rho in rng.uniform(lo - 0.005, hi + 0.005, size=20):
        config = FilterConfig(
            rho=float(rho), reference=reference, prefilter_floor=-1.0
        )
        scored = filter_corpus(records, provider, config)
        assert scored.retained_ids() == naive_retained(oracle_scores, float(rho))
    assert time.perf_counter() - start < 5.0


def test_criterion_02_retention_monotone_in_threshold():
    rng = np.random.default_rng(411)
    reference = ReferenceSet(
        embeddings=tuple(EmbeddingVector(random_unit(rng, 8)) for _ in range(3)),
        provenance="acceptance",
    )
    for _ in range(100):
        n = int(rng.integers(5, 60))
        items = [
            (make_record(f"e{i}"), EmbeddingVector(random_unit(rng, 8)))
            for i in range(n)
        ]
        low, high = sorted(rng.uniform(-1.0, 1.0, size=2))
        keep_low = score_embeddings(
            items,
            FilterConfig(rho=float(low), reference=reference, prefilter_floor=-1.0),
        ).retained_ids()
        keep_high = score_embeddings(
            items,
            FilterConfig(rho=float(high), reference=reference, prefilter_floor=-1.0),
        ).retained_ids()
        assert keep_high <= keep_low


def test_criterion_03_retention_table_reproduces_published_percentages():
    counts = {
        BucketLabel.BRONZE: 11_885,
        BucketLabel.SILVER: 6_824,
        BucketLabel.GOLD: 3_841,
        BucketLabel.PLATINUM: 2_091,
        BucketLabel.DIAMOND: 1_499,
    }
    printed = {
        BucketLabel.BRONZE: 0.40,
        BucketLabel.SILVER: 0.23,
        BucketLabel.GOLD: 0.13,
        BucketLabel.PLATINUM: 0.07,
        BucketLabel.DIAMOND: 0.05,
    }
    table = retention_table(counts, total_count=3_020_000)
    for label, expected in printed.items():
        assert abs(table.row(label).percent - expected) <= 0.01


def test_criterion_04_threshold_recommendation_hits_published_boundary():
    relevance = (58.0, 70.0, 78.0, 84.0, 92.0)
    stats = [
        BucketRelevanceStat(bucket=bucket, n_items=50, relevance_pct=pct, agreement=1.0)
        for bucket, pct in zip(SCORED_BUCKETS, relevance)
    ]
    recommendation = recommend_threshold(stats, 84.0)
    assert recommendation.boundary == 54.5
    assert recommendation.rho == 0.545
    assert recommendation.buckets == ("Platinum", "Diamond")
    assert recommendation.warning is None


def test_criterion_05_duplicate_clusters_match_bruteforce():
    start = time.perf_counter()
    rng = np.random.default_rng(412)
    for trial in range(50):
        method = "phash" if trial % 2 == 0 else "embedding"
        n = int(rng.integers(20, 301))
        records, features, raw = planted_corpus(rng, n, method)
        ids = [r.id for r in records]
        if method == "phash":
            config = DedupConfig(method="phash", max_hamming=16)
            expected = naive_clusters(ids, raw, "phash", max_hamming=16)
        else:
            config = DedupConfig(method="embedding", epsilon=0.95)
            expected = naive_clusters(ids, raw, "embedding", epsilon=0.95)
        clusters = dedup_corpus(records, features, config)
        assert {c.member_ids for c in clusters} == set(expected)
        sources = {r.id: r.source.value for r in records}
        for cluster in clusters:
            assert cluster.canonical_id == naive_canonical(cluster.member_ids, sources)
    assert time.perf_counter() - start < 30.0


def test_criterion_06_phash_known_answers_and_recompression():
    rng = np.random.default_rng(413)
    buf = io.BytesIO()
    Image.fromarray(np.full((32, 32, 3), 128, dtype=np.uint8), mode="RGB").save(
        buf, format="PNG"
    )
    const_bytes = buf.getvalue()
    assert phash64(const_bytes).bits == naive_phash(const_bytes)
    assert phash64(const_bytes).bits == 0x8000000000000000

    fixtures = [noise_png(rng, 48), smooth_png(rng, 64), smooth_png(rng, 80)]
    for data in fixtures:
        assert phash64(data).bits == naive_phash(data)
    assert hamming(phash64(fixtures[0]), phash64(bytes(fixtures[0]))) == 0

    for _ in range(20):
        png = smooth_png(rng, 64)
        jpg = recompress_jpeg(png, quality=90)
        original = phash64(png)
        recompressed = phash64(jpg)
        assert original.bits == naive_phash(png)
        assert recompressed.bits == naive_phash(jpg)
        assert hamming(original, recompressed) <= 16


def test_criterion_07_validation_verdict_truth_table():
    single = list(itertools.product([True, False], [1, 3, 5], ["yes", "no", "unsure"]))
    for n in (1, 2, 3):
        for combo in itertools.product(single, repeat=n):
            votes = [
                ValidationVote(f"v{k}", "img", photo, relevance, caption)
                for k, (photo, relevance, caption) in enumerate(combo)
            ]
            verdict = aggregate_verdict(votes)
            expected = naive_verdict(list(combo))
            assert verdict.quality is expected["quality"]
            assert verdict.caption is expected["caption"]
            assert verdict.relevance is expected["relevance"]
            assert verdict.overall is expected["overall"]

    rng = np.random.default_rng(414)
    captions = ["yes", "no", "unsure"]
    for _ in range(10_000):
        votes = [
            ValidationVote(
                f"v{k}",
                "img",
                bool(rng.integers(0, 2)),
                int(rng.integers(1, 6)),
                captions[int(rng.integers(0, 3))],
            )
            for k in range(int(rng.integers(1, 5)))
        ]
        verdict = aggregate_verdict(votes)
        if verdict.overall is True:
            assert verdict.quality is True
            assert verdict.caption is True
            assert verdict.relevance is True
            assert len(votes) >= 2


def test_criterion_08_contribution_points_and_co_authorship():
    expected = {
        "ID": 2, "SG": 2, "PH": 2,
        "TH": 3, "MY": 3, "VN": 3,
        "BN": 4, "LA": 4, "KH": 4, "MM": 4, "TL": 4,
    }
    assert dict(IMAGE_POINTS) == expected
    for country, points in expected.items():
        assert image_points(country) == points

    ledger = ContributionLedger()
    for _ in range(100):
        award(ledger, "prolific", Activity.image("ID"))
    for _ in range(99):
        award(ledger, "almost", Activity.image("ID"))
    award(ledger, "almost", Activity.validation())
    assert ledger.contributors["prolific"].total == 200
    assert ledger.contributors["almost"].total == 199
    assert co_authors(ledger) == ["prolific"]


def _toy_manifest(tmp_path):
    """20 manifest lines: 14 unique, 2+2 byte-identical copies, 2 dead links."""
    rng = np.random.default_rng(415)
    src = tmp_path / "src"
    src.mkdir()
    lines = []
    for i in range(14):
        path = src / f"u{i}.png"
        path.write_bytes(noise_png(rng))
        lines.append(json.dumps({"id": f"img-{i:02d}", "url": path.as_uri()}))
    for base, copies in (("u0", ("c0-00", "c0-01")), ("u1", ("c1-00", "c1-01"))):
        for copy_id in copies:
            path = src / f"{copy_id}.png"
            path.write_bytes((src / f"{base}.png").read_bytes())
            lines.append(json.dumps({"id": copy_id, "url": path.as_uri()}))
    lines.append(json.dumps({"id": "bad-0", "url": (src / "gone0.png").as_uri()}))
    lines.append(json.dumps({"id": "bad-1", "url": (src / "gone1.png").as_uri()}))
    manifest = tmp_path / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def _report_bytes(config):
    reports = pipeline_module.Path(config.output_dir) / "reports"
    return {p.name: p.read_bytes() for p in sorted(reports.iterdir())}


def test_criterion_09_pipeline_determinism_and_resume(tmp_path):
    manifest = _toy_manifest(tmp_path)
    rng = np.random.default_rng(416)
    reference = tmp_path / "reference.bin"
    save_reference(
        reference,
        ReferenceSet(
            embeddings=tuple(EmbeddingVector(random_unit(rng, 16)) for _ in range(4)),
            provenance="acceptance",
        ),
    )

    def config_for(tag):
        return PipelineConfig(
            seed=7,
            stages=("ingest", "embed", "filter", "dedup"),
            output_dir=str(tmp_path / tag / "out"),
            manifest=str(manifest),
            corpus_dir=str(tmp_path / tag / "corpus"),
            cache_dir=str(tmp_path / tag / "cache"),
            dims=16,
            rho=-1.0,
            prefilter_floor=-1.0,
            reference_path=str(reference),
            method="phash",
            max_hamming=8,
        )

    control = config_for("control")
    first = run_pipeline(control)
    assert first.ingested == 20
    first_reports = _report_bytes(control)
    assert run_pipeline(control) == first
    assert _report_bytes(control) == first_reports

    interrupted = config_for("resumed")
    with pytest.MonkeyPatch.context() as mp:
        def boom(*args, **kwargs):
            raise RuntimeError("killed mid-dedup")

        mp.setattr(pipeline_module, "dedup_corpus", boom)
        with pytest.raises(RuntimeError):
            run_pipeline(interrupted)
    assert run_pipeline(interrupted) == first
    assert _report_bytes(interrupted) == first_reports


def test_criterion_10_throughput_meter_identity(tmp_path):
    start = time.perf_counter()
    rng = np.random.default_rng(417)
    blobs = [noise_png(rng) for _ in range(500)]
    provider = EmbeddingProvider(
        ProviderConfig(
            backend="deterministic", dims=16, cache_dir=str(tmp_path / "cache")
        )
    )
    runs = [
        measure_throughput("phash", blobs),
        measure_throughput(
            "embedding",
            blobs,
            provider=provider,
            config=DedupConfig(method="embedding", epsilon=0.95),
        ),
    ]
    for samples in runs:
        for sample in samples:
            assert sample.images_processed == 500
            assert sample.elapsed > 0.0
            assert math.isfinite(sample.images_per_second)
            assert sample.images_per_second > 0.0
            assert sample.images_per_second == sample.images_processed / sample.elapsed
    assert time.perf_counter() - start < 60.0
