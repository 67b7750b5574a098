"""Curation toolkit for culturally-relevant image corpora.

Library surface: manifest ingestion and fetching, pluggable embedding
providers with a content-addressed cache, reference-similarity filtering
with bucket statistics, perceptual-hash and embedding deduplication,
human rating calibration, crowd QA verdicts, and the contribution ledger.
The review HTTP server lives in `curator.review_api` (imported lazily so
the core library stays light).
"""

from .core import (
    BUCKETS,
    SCORED_BUCKETS,
    SEA_COUNTRIES,
    BucketLabel,
    EmbeddingVector,
    ImageRecord,
    PerceptualHash,
    ReferenceSet,
    SimilarityBucket,
    Source,
    bucket_for_centi,
    bucket_for_score,
    cosine,
    hamming,
    normalize,
)
from .errors import (
    CuratorError,
    DecodeError,
    DimensionError,
    EmptyInputError,
    EmptyManifestError,
    EmptyReferenceError,
    MissingFeatureError,
    NoDataError,
    NormalizationError,
    NoVotesError,
    PreconditionError,
    ProviderUnavailable,
    UnknownCountryError,
)
from .embedding import (
    BatchEncodeResult,
    DeterministicBackend,
    EmbeddingCache,
    EmbeddingProvider,
    ProviderConfig,
    RemoteBackend,
)
from .phash import (
    phash64,
    phash64_file,
    read_hash_sidecar,
    write_hash_sidecar,
)
from .filtering import (
    FilterConfig,
    RetentionTable,
    ScoredCorpus,
    ScoredEntry,
    assign_bucket,
    filter_corpus,
    load_reference,
    mean_reference_similarity,
    render_retention_text,
    retention_table,
    save_reference,
    score_embeddings,
    scored_from_records,
    threshold_sweep,
    write_retention_csv,
)
from .dedup import (
    DedupConfig,
    DuplicateCluster,
    ThroughputSample,
    UnionFind,
    apply_clusters,
    dedup_corpus,
    duplicate_pairs,
    is_duplicate,
    measure_throughput,
    survivors,
    write_cluster_report,
)
from .ingest import (
    CrowdsourceImport,
    FetchReport,
    ManifestLoad,
    fetch_images,
    import_crowdsource,
    load_manifest,
)
from .calibration import (
    LIKERT_RUBRICS,
    BucketRelevanceStat,
    PairScore,
    RatingRecord,
    RatingStore,
    RatingTask,
    SampleSet,
    ThresholdRecommendation,
    agreement_needs_escalation,
    bucket_relevance,
    chance_corrected_agreement,
    likert_summary,
    pair_precision,
    percent_agreement,
    read_ratings,
    recommend_threshold,
    sample_top_pairs,
    stratified_sample,
    unrated_items,
    write_ratings,
)
from .qa import (
    Activity,
    ContributionLedger,
    ContributorPoints,
    QAVerdict,
    ValidationVote,
    aggregate_verdict,
    authorship_order,
    award,
    co_authors,
    image_points,
    image_points_for_regions,
    needs_escalation,
    read_ledger,
    read_votes,
    redaction_queue,
    verdicts_for,
    write_verdict_report,
    write_votes,
)
from .corpus import load_corpus, save_corpus
from .pipeline import (
    PipelineConfig,
    RunSummary,
    dataset_stats,
    load_config,
    run_pipeline,
)

__version__ = "0.1.0"
