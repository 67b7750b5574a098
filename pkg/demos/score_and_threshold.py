"""Score a synthetic corpus, bucket it, and let simulated raters pick rho.

The loop in miniature: embeddings are scored by mean cosine similarity
against a curated reference set, the centi-scores fall into named buckets,
a stratified sample goes out for human rating, and the per-bucket
relevance rates drive the recommended retention threshold.
"""

import numpy as np

from curator.calibration import (
    RatingRecord,
    RatingTask,
    bucket_relevance,
    recommend_threshold,
    stratified_sample,
)
from curator.core import EmbeddingVector, ImageRecord, ReferenceSet, Source
from curator.filtering import (
    FilterConfig,
    render_retention_text,
    score_embeddings,
    threshold_sweep,
)

DIMS = 16
N_IMAGES = 400


def vector_with_score(score: float, rng) -> EmbeddingVector:
    """Unit vector whose cosine against the e0 axis is exactly `score`."""
    tail = rng.standard_normal(DIMS - 1)
    tail *= np.sqrt(1.0 - score * score) / np.linalg.norm(tail)
    return EmbeddingVector(np.concatenate([[score], tail]))


def main():
    rng = np.random.default_rng(12)

    # Reference set: all mass on one axis, so scores are easy to plant.
    axis = np.zeros(DIMS)
    axis[0] = 1.0
    reference = ReferenceSet(
        embeddings=tuple(EmbeddingVector(axis) for _ in range(4)),
        provenance="demo-curated",
    )

    print("== Scoring ==")
    true_scores = rng.normal(0.53, 0.02, N_IMAGES).clip(0.40, 0.62)
    items = [
        (
            ImageRecord(
                id=f"img-{i:03d}",
                source=Source.CRAWLED,
                url=f"https://example.test/img-{i:03d}.png",
            ),
            vector_with_score(float(s), rng),
        )
        for i, s in enumerate(true_scores)
    ]
    config = FilterConfig(rho=0.545, reference=reference, prefilter_floor=0.515)
    scored = score_embeddings(items, config)
    print(f"scored {scored.total_scored} of {N_IMAGES} images "
          f"({scored.below_floor} below the prefilter floor)")
    print(f"retained at rho={config.rho}: {len(scored.retained_ids())}")
    print()
    print(render_retention_text(threshold_sweep(scored, N_IMAGES)))
    print()

    print("== Stratified sample ==")
    sample = stratified_sample(scored, n_per_bucket=12, seed=0)
    for label, sampled in sample.per_bucket.items():
        print(f"  {label:<10}{len(sampled)} items out for rating")
    print()

    # Two simulated raters: the odds of a "yes" rise with the true score.
    print("== Simulated ratings ==")
    score_of = {entry.record.id: entry.score for entry in scored.entries}
    ratings = []
    for rater in ("rater-a", "rater-b"):
        for item in sample.all_items():
            p_yes = np.interp(score_of[item], [0.515, 0.56], [0.30, 0.98])
            value = "yes" if rng.random() < p_yes else "no"
            ratings.append(
                RatingRecord(
                    rater_id=rater,
                    item_id=item,
                    task=RatingTask.BUCKET_RELEVANCE,
                    value=value,
                )
            )
    print(f"collected {len(ratings)} ratings from 2 raters")
    print()

    print("== Per-bucket relevance ==")
    stats = bucket_relevance(ratings, sample)
    for stat in stats:
        agreement = "-" if stat.agreement is None else f"{stat.agreement:.2f}"
        print(
            f"  {stat.bucket.label.value:<10}{stat.n_items:>3} rated  "
            f"{stat.relevance_pct:5.1f}% relevant  agreement {agreement}"
        )
    print()

    recommendation = recommend_threshold(stats, target_relevance_pct=85.0)
    print("== Recommendation ==")
    if recommendation.warning:
        print(f"  warning: {recommendation.warning}")
    print(f"  buckets clearing 85%: {', '.join(recommendation.buckets) or 'none'}")
    print(f"  recommended boundary: {recommendation.boundary} (rho {recommendation.rho})")


if __name__ == "__main__":
    main()
