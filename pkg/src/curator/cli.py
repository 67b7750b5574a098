"""Command-line entry points.

One subcommand per pipeline capability: ingest, embed, filter, calibrate,
dedup, bench, qa, points, stats, run.
"""

from __future__ import annotations

import argparse
import io
import sys
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from .calibration import (
    BASELINE_THROUGHPUT_IPS,
    PairScore,
    RatingStore,
    bucket_relevance,
    read_ratings,
    recommend_threshold,
    stratified_sample,
    unrated_items,
)
from .corpus import images_dir, load_corpus, save_corpus
from .dedup import (
    DedupConfig,
    apply_clusters,
    dedup_corpus,
    measure_throughput,
    survivors,
    write_cluster_report,
)
from .embedding import EmbeddingProvider, ProviderConfig
from .errors import CuratorError
from .filtering import (
    FilterConfig,
    filter_corpus,
    load_reference,
    render_retention_text,
    scored_from_records,
    threshold_sweep,
    write_retention_csv,
)
from .ingest import fetch_images, import_crowdsource, load_manifest
from .phash import phash64_file, write_hash_sidecar
from .pipeline import (
    dataset_stats,
    load_config,
    render_stats_text,
    run_pipeline,
    write_stats_csv,
)
from .qa import (
    authorship_order,
    co_authors,
    group_votes,
    needs_escalation,
    read_ledger,
    read_votes,
    redaction_queue,
    verdicts_for,
    write_verdict_report,
)


def _add_provider_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--backend", default="deterministic", choices=["deterministic", "remote"])
    parser.add_argument("--dims", type=int, default=64)
    parser.add_argument("--endpoint", default=None)
    parser.add_argument("--cache", default=None, help="embedding cache directory")
    parser.add_argument("--batch-size", type=int, default=32)


def _build_provider(args) -> EmbeddingProvider:
    cache = args.cache
    if cache is None:
        corpus = getattr(args, "corpus", None)
        if corpus:
            cache = str(Path(corpus) / ".embed-cache")
        else:
            cache = tempfile.mkdtemp(prefix="curator-cache-")
    config = ProviderConfig(
        backend=args.backend,
        dims=args.dims,
        cache_dir=cache,
        endpoint=args.endpoint,
        batch_size=args.batch_size,
    )
    return EmbeddingProvider(config)


def _readable_blobs(records):
    blobs, ids = [], []
    for record in records:
        if record.local_path and Path(record.local_path).exists():
            blobs.append(Path(record.local_path).read_bytes())
            ids.append(record.id)
    return blobs, ids


def _cmd_ingest(args) -> int:
    loaded = load_manifest(args.manifest)
    report = fetch_images(
        loaded.records,
        images_dir(args.out),
        parallelism=args.parallelism,
        timeout=args.timeout,
        max_bytes=args.max_bytes,
    )
    if args.crowdsource:
        imported = import_crowdsource(args.crowdsource)
        for line_no, reason in imported.rejected:
            print(f"crowdsource line {line_no}: {reason}", file=sys.stderr)
        loaded.records.extend(imported.records)
    save_corpus(loaded.records, args.out)
    if loaded.skipped:
        print(f"skipped {loaded.skipped} malformed manifest lines", file=sys.stderr)
    print(report.render_text())
    return 0


def _cmd_embed(args) -> int:
    provider = _build_provider(args)
    records = load_corpus(args.corpus)
    blobs, ids = _readable_blobs(records)
    result = provider.encode_batch(blobs)
    for index, detail in sorted(result.errors.items()):
        print(f"{ids[index]}: {detail}", file=sys.stderr)
    print(f"embedded {len(blobs) - len(result.errors)} of {len(blobs)} images")
    return 0


def _cmd_filter(args) -> int:
    provider = _build_provider(args)
    records = load_corpus(args.corpus)
    reference = load_reference(args.reference)
    config = FilterConfig(rho=args.rho, reference=reference, prefilter_floor=args.floor)
    scored = filter_corpus(records, provider, config)
    save_corpus(records, args.corpus)
    table = threshold_sweep(scored, max(len(records), scored.total_scored))
    if args.report:
        write_retention_csv(args.report, table)
    print(render_retention_text(table))
    print(f"retained {len(scored.retained_ids())} at rho={args.rho}")
    if scored.unscored:
        print(f"unscored: {len(scored.unscored)}", file=sys.stderr)
    return 0


def _parse_serve(value: str) -> tuple[str, int]:
    host, _, port = value.rpartition(":")
    return (host or "127.0.0.1", int(port))


def _cmd_calibrate(args) -> int:
    records = load_corpus(args.scored)
    scored = scored_from_records(records)
    sample = stratified_sample(scored, n_per_bucket=args.per_bucket, seed=args.seed)
    for label, size in sample.short_sampled.items():
        print(f"bucket {label}: only {size} items available", file=sys.stderr)

    if args.serve:
        from .review_api import ReviewServer, create_app, serve

        store = RatingStore(args.ratings)
        server = ReviewServer(
            records,
            sample,
            store,
            target_relevance_pct=args.target_relevance,
        )
        app = create_app(server, static_dir=args.static)
        host, port = _parse_serve(args.serve)
        print(f"review server on http://{host}:{port}")
        serve(app, host=host, port=port)
        return 0

    if not Path(args.ratings).exists():
        print(f"no ratings at {args.ratings}; sample drawn, nothing to analyze")
        for label, items in sample.per_bucket.items():
            print(f"{label:<10}{len(items)} sampled")
        return 0
    ratings = read_ratings(args.ratings)
    stats = bucket_relevance(ratings, sample)
    for stat in stats:
        agreement = "-" if stat.agreement is None else f"{stat.agreement:.2f}"
        print(
            f"{stat.bucket.label.value:<10}{stat.n_items:>4} rated"
            f"{stat.relevance_pct:>8.1f}%  agreement {agreement}"
        )
    missing = unrated_items(ratings, sample)
    if missing:
        print(f"unrated items: {len(missing)}", file=sys.stderr)
    recommendation = recommend_threshold(stats, args.target_relevance)
    if recommendation.warning:
        print(f"warning: {recommendation.warning}", file=sys.stderr)
    print(f"recommended boundary {recommendation.boundary} (rho {recommendation.rho})")
    return 0


def _cmd_dedup(args) -> int:
    records = load_corpus(args.corpus)
    config = DedupConfig(
        method=args.method,
        epsilon=args.epsilon,
        max_hamming=args.max_hamming,
        exact=args.exact,
    )
    candidates = sorted((r for r in records if r.local_path), key=lambda r: r.id)
    if args.method == "phash":
        features = {
            r.id: phash64_file(r.local_path)
            for r in candidates
            if Path(r.local_path).exists()
        }
        if args.hashes:
            write_hash_sidecar(args.hashes, features)
    else:
        provider = _build_provider(args)
        blobs, ids = _readable_blobs(candidates)
        result = provider.encode_batch(blobs)
        features = {
            ids[i]: result.vectors[i]
            for i in range(len(ids))
            if result.vectors[i] is not None
        }
    clusters = dedup_corpus(candidates, features, config)
    apply_clusters(records, clusters)
    save_corpus(records, args.corpus)
    if args.report:
        write_cluster_report(args.report, clusters)
    kept = survivors(candidates, clusters)
    duplicates = len(candidates) - len(kept)
    print(f"{len(clusters)} clusters, {len(kept)} survivors, {duplicates} duplicates")
    return 0


def _synthetic_images(n: int, side: int = 32, seed: int = 0) -> list[bytes]:
    rng = np.random.default_rng(seed)
    blobs = []
    for _ in range(n):
        pixels = rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)
        buf = io.BytesIO()
        Image.fromarray(pixels, mode="RGB").save(buf, format="PNG")
        blobs.append(buf.getvalue())
    return blobs


def _cmd_bench(args) -> int:
    blobs = _synthetic_images(args.n, seed=args.seed)
    provider = _build_provider(args) if args.method == "embedding" else None
    config = None
    if args.method == "embedding":
        config = DedupConfig(method="embedding", epsilon=args.epsilon)
    samples = measure_throughput(
        args.method, blobs, repetitions=args.repetitions, provider=provider, config=config
    )
    baseline = BASELINE_THROUGHPUT_IPS.get(args.method)
    for i, sample in enumerate(samples, start=1):
        context = f" (published baseline {baseline:.2f})" if baseline else ""
        print(
            f"run {i}: {sample.images_processed} images in {sample.elapsed:.3f}s"
            f" = {sample.images_per_second:.2f} img/s{context}"
        )
    return 0


def _cmd_qa(args) -> int:
    votes = read_votes(args.votes)
    verdicts = write_verdict_report(votes, args.report)
    passed = sum(1 for v in verdicts if v.overall is True)
    failed = sum(1 for v in verdicts if v.overall is False)
    pending = sum(1 for v in verdicts if v.overall is None)
    grouped = group_votes(votes)
    escalations = sum(1 for group in grouped.values() if needs_escalation(group))
    flagged = redaction_queue(votes)
    print(f"{len(verdicts)} images: {passed} pass, {failed} fail, {pending} pending")
    print(f"{escalations} need a third validator")
    if flagged:
        print(f"re-redaction queue: {', '.join(flagged)}")
    return 0


def _cmd_points(args) -> int:
    ledger = read_ledger(args.ledger)
    if args.authors:
        listed = co_authors(ledger)
        acknowledged = [c for c in authorship_order(ledger) if c not in listed]
        print("co-authors:")
        for name in listed:
            print(f"  {name}  {ledger.contributors[name].total}")
        print("acknowledgments:")
        for name in acknowledged:
            print(f"  {name}  {ledger.contributors[name].total}")
    else:
        for name in authorship_order(ledger):
            entry = ledger.contributors[name]
            print(
                f"{name:<20}{entry.total:>6}"
                f"  (images {entry.image_points}, validations {entry.validation_points},"
                f" assigned {entry.assigned_points})"
            )
    return 0


def _cmd_stats(args) -> int:
    records = load_corpus(args.corpus)
    votes = read_votes(args.votes)
    rows = dataset_stats(records, verdicts_for(votes))
    if args.report:
        write_stats_csv(args.report, rows)
    print(render_stats_text(rows))
    return 0


def _cmd_run(args) -> int:
    config = load_config(args.config, overrides=args.set or [])
    summary = run_pipeline(config)
    for key, value in summary.to_dict().items():
        print(f"{key:<10}{value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="curator", description="culturally-relevant image corpus curation"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="load a manifest and fetch images")
    p.add_argument("--manifest", required=True)
    p.add_argument("--out", required=True, help="corpus directory")
    p.add_argument("--parallelism", type=int, default=8)
    p.add_argument("--timeout", type=float, default=30.0)
    p.add_argument("--max-bytes", type=int, default=20 * 1024 * 1024)
    p.add_argument("--crowdsource", default=None, help="crowdsource export to merge")
    p.set_defaults(func=_cmd_ingest)

    p = sub.add_parser("embed", help="encode fetched images into the cache")
    p.add_argument("--corpus", required=True)
    _add_provider_args(p)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("filter", help="score against a reference set and retain")
    p.add_argument("--corpus", required=True)
    p.add_argument("--reference", required=True)
    p.add_argument("--rho", type=float, default=0.545)
    p.add_argument("--floor", type=float, default=0.515)
    p.add_argument("--report", default=None, help="retention CSV path")
    _add_provider_args(p)
    p.set_defaults(func=_cmd_filter)

    p = sub.add_parser("calibrate", help="stratified sampling and threshold analysis")
    p.add_argument("--scored", required=True, help="scored corpus directory")
    p.add_argument("--serve", default=None, help="host:port for the review server")
    p.add_argument("--per-bucket", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--target-relevance", type=float, default=85.0)
    p.add_argument("--ratings", default="ratings.jsonl")
    p.add_argument("--static", default=None, help="review UI bundle directory")
    p.set_defaults(func=_cmd_calibrate)

    p = sub.add_parser("dedup", help="cluster duplicates and pick survivors")
    p.add_argument("--corpus", required=True)
    p.add_argument("--method", required=True, choices=["phash", "embedding"])
    p.add_argument("--epsilon", type=float, default=0.95)
    p.add_argument("--max-hamming", type=int, default=16)
    p.add_argument("--exact", action="store_true", default=None)
    p.add_argument("--report", default=None, help="cluster CSV path")
    p.add_argument("--hashes", default=None, help="hash sidecar output path")
    _add_provider_args(p)
    p.set_defaults(func=_cmd_dedup)

    p = sub.add_parser("bench", help="throughput on synthetic images")
    p.add_argument("--method", required=True, choices=["phash", "embedding"])
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--repetitions", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=float, default=0.95)
    _add_provider_args(p)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("qa", help="aggregate validation votes into verdicts")
    p.add_argument("--votes", required=True)
    p.add_argument("--report", default="verdicts.csv")
    p.set_defaults(func=_cmd_qa)

    p = sub.add_parser("points", help="contribution totals and authorship order")
    p.add_argument("--ledger", required=True)
    p.add_argument("--authors", action="store_true")
    p.set_defaults(func=_cmd_points)

    p = sub.add_parser("stats", help="per-region dataset statistics")
    p.add_argument("--corpus", required=True)
    p.add_argument("--votes", required=True)
    p.add_argument("--report", default=None)
    p.set_defaults(func=_cmd_stats)

    p = sub.add_parser("run", help="run the configured pipeline end to end")
    p.add_argument("--config", default=None, help="INI config path")
    p.add_argument(
        "--set",
        action="append",
        metavar="SECTION.KEY=VALUE",
        help="override one config key",
    )
    p.set_defaults(func=_cmd_run)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except CuratorError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
