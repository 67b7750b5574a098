"""Reference-similarity filtering, bucket accounting, and reference IO."""

import numpy as np
import pytest

from curator.core import (
    BucketLabel,
    EmbeddingVector,
    ReferenceSet,
    normalize,
)
from curator.errors import DimensionError
from curator.filtering import (
    FilterConfig,
    ScoredCorpus,
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

from conftest import (
    make_record,
    noise_png,
    random_unit,
    unit_vector,
    vector_with_score,
)
from oracles import naive_mean_similarity, naive_retained


def make_reference(rng, count=4, dims=8):
    return ReferenceSet(
        embeddings=tuple(EmbeddingVector(random_unit(rng, dims)) for _ in range(count))
    )


def axis_reference(dims=8, axis=0):
    """Single basis-vector reference: the mean similarity of any unit
    vector v is exactly v[axis]."""
    return ReferenceSet(embeddings=(EmbeddingVector(unit_vector(dims, axis)),))


class TestFilterConfig:
    def test_rho_bounds(self):
        ref = axis_reference()
        with pytest.raises(ValueError):
            FilterConfig(rho=1.5, reference=ref)
        with pytest.raises(ValueError):
            FilterConfig(rho=-1.5, reference=ref)

    def test_floor_must_not_exceed_rho(self):
        with pytest.raises(ValueError):
            FilterConfig(rho=0.4, reference=axis_reference())

    def test_default_floor(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        assert config.prefilter_floor == 0.515


class TestMeanSimilarity:
    def test_matches_naive(self):
        rng = np.random.default_rng(70)
        for _ in range(20):
            dims = int(rng.integers(3, 20))
            ref = make_reference(rng, count=int(rng.integers(1, 6)), dims=dims)
            x = EmbeddingVector(random_unit(rng, dims))
            got = mean_reference_similarity(x, ref)
            want = naive_mean_similarity(x.values, [e.values for e in ref.embeddings])
            assert abs(got - want) < 1e-12

    def test_single_reference_is_cosine(self):
        rng = np.random.default_rng(71)
        x = EmbeddingVector(random_unit(rng, 8))
        ref = axis_reference(dims=8, axis=2)
        assert mean_reference_similarity(x, ref) == pytest.approx(x.values[2])

    def test_dimension_mismatch(self):
        x = EmbeddingVector(unit_vector(6, 0))
        with pytest.raises(DimensionError):
            mean_reference_similarity(x, axis_reference(dims=8))


class TestScoreEmbeddings:
    def items_with_scores(self, scores, dims=8):
        return [
            (make_record(rid), EmbeddingVector(vector_with_score(s, dims)))
            for rid, s in scores.items()
        ]

    def test_retained_set_matches_naive(self):
        rng = np.random.default_rng(72)
        for _ in range(10):
            scores = {
                f"r{i:02d}": float(rng.uniform(0.50, 0.60)) for i in range(30)
            }
            config = FilterConfig(rho=0.545, reference=axis_reference())
            scored = score_embeddings(self.items_with_scores(scores), config)
            floored = {k: v for k, v in scores.items() if v >= 0.515}
            assert scored.retained_ids() == naive_retained(floored, 0.545)

    def test_exact_tie_at_rho_is_retained(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        scored = score_embeddings(self.items_with_scores({"tie": 0.545}), config)
        entry = scored.entries[0]
        assert entry.score == 0.545
        assert entry.retained

    def test_below_floor_counted_not_stored(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        scored = score_embeddings(
            self.items_with_scores({"lo": 0.50, "mid": 0.52, "hi": 0.58}), config
        )
        assert scored.below_floor == 1
        assert {e.record.id for e in scored.entries} == {"mid", "hi"}
        assert scored.retained_ids() == {"hi"}
        assert scored.total_scored == 3

    def test_floor_tie_is_stored(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        scored = score_embeddings(self.items_with_scores({"edge": 0.515}), config)
        assert scored.below_floor == 0
        assert scored.entries[0].bucket.label is BucketLabel.BRONZE

    def test_entries_sorted_by_id(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        scored = score_embeddings(
            self.items_with_scores({"z": 0.55, "a": 0.53, "m": 0.56}), config
        )
        assert [e.record.id for e in scored.entries] == ["a", "m", "z"]

    def test_bucket_assignment(self):
        for score, label in [
            (0.518, BucketLabel.BRONZE),
            (0.53, BucketLabel.SILVER),
            (0.54, BucketLabel.GOLD),
            (0.55, BucketLabel.PLATINUM),
            (0.58, BucketLabel.DIAMOND),
        ]:
            assert assign_bucket(score).label is label


class TestFilterCorpus:
    def test_unreadable_records_reported_not_fatal(self, tmp_path, det_provider):
        rng = np.random.default_rng(73)
        good = tmp_path / "good.png"
        good.write_bytes(noise_png(rng))
        garbage = tmp_path / "garbage.png"
        garbage.write_bytes(b"not pixels at all")
        records = [
            make_record("good", local_path=good),
            make_record("nopath"),
            make_record("missing", local_path=tmp_path / "absent.png"),
            make_record("garbage", local_path=garbage),
        ]
        provider = det_provider(dims=8)
        config = FilterConfig(rho=-1.0, reference=axis_reference(), prefilter_floor=-1.0)
        scored = filter_corpus(records, provider, config)
        assert scored.unscored == ("garbage", "missing", "nopath")
        assert [e.record.id for e in scored.entries] == ["good"]

    def test_scores_written_back_to_records(self, tmp_path, det_provider):
        rng = np.random.default_rng(74)
        path = tmp_path / "img.png"
        path.write_bytes(noise_png(rng))
        record = make_record("img", local_path=path)
        provider = det_provider(dims=8)
        config = FilterConfig(rho=-1.0, reference=axis_reference(), prefilter_floor=-1.0)
        scored = filter_corpus([record], provider, config)
        assert record.similarity_score == scored.entries[0].score
        assert record.bucket is scored.entries[0].bucket.label


class TestScoredFromRecords:
    def test_round_trip_preserves_retention(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        items = [
            (make_record(rid), EmbeddingVector(vector_with_score(s, 8)))
            for rid, s in {"a": 0.52, "b": 0.545, "c": 0.56}.items()
        ]
        first = score_embeddings(items, config)
        for entry in first.entries:
            entry.record.similarity_score = entry.score
        rebuilt = scored_from_records([e.record for e in first.entries], config)
        assert rebuilt.retained_ids() == first.retained_ids()
        assert [e.score for e in rebuilt.entries] == [e.score for e in first.entries]

    def test_without_config_dropped_bucket_rule(self):
        records = [
            make_record("keep", similarity_score=0.53),
            make_record("drop", similarity_score=0.40),
        ]
        scored = scored_from_records(records)
        assert scored.retained_ids() == {"keep"}

    def test_missing_scores_reported(self):
        records = [make_record("a", similarity_score=0.53), make_record("b")]
        scored = scored_from_records(records)
        assert scored.unscored == ("b",)


class TestRetentionTable:
    def test_unstored_mass_lands_in_dropped(self):
        counts = {BucketLabel.BRONZE: 10, BucketLabel.DIAMOND: 5}
        table = retention_table(counts, total_count=100)
        assert table.row(BucketLabel.DROPPED).count == 85
        assert table.row(BucketLabel.BRONZE).percent == 10.0
        assert sum(r.count for r in table.rows) == 100

    def test_exact_fraction_percentages(self):
        table = retention_table({BucketLabel.GOLD: 1}, total_count=3)
        assert table.row(BucketLabel.GOLD).percent == 100.0 / 3.0

    def test_total_below_stored_rejected(self):
        with pytest.raises(ArithmeticError):
            retention_table({BucketLabel.GOLD: 5}, total_count=3)

    def test_zero_total(self):
        table = retention_table({}, total_count=0)
        assert all(r.percent == 0.0 for r in table.rows)

    def test_unknown_row_lookup(self):
        table = retention_table({}, total_count=1)
        with pytest.raises(KeyError):
            table.row("NotABucket")

    def test_sweep_counts_entries(self):
        config = FilterConfig(rho=0.545, reference=axis_reference())
        items = [
            (make_record(f"r{i}"), EmbeddingVector(vector_with_score(s, 8)))
            for i, s in enumerate([0.52, 0.52, 0.53, 0.56])
        ]
        scored = score_embeddings(items, config)
        table = threshold_sweep(scored, total_count=10)
        assert table.row(BucketLabel.BRONZE).count == 2
        assert table.row(BucketLabel.SILVER).count == 1
        assert table.row(BucketLabel.DIAMOND).count == 1
        assert table.row(BucketLabel.DROPPED).count == 6


class TestRendering:
    def table(self):
        return retention_table({BucketLabel.BRONZE: 3}, total_count=10)

    def test_csv_layout(self, tmp_path):
        path = tmp_path / "retention.csv"
        write_retention_csv(path, self.table())
        lines = path.read_text().splitlines()
        assert lines[0] == "bucket,count,percent"
        assert "Bronze,3,30.0000" in lines

    def test_text_render(self):
        text = render_retention_text(self.table())
        assert "Bronze" in text and "30.00%" in text
        assert text.splitlines()[-1].startswith("Total")


class TestReferenceIO:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(75)
        ref = make_reference(rng, count=5, dims=12)
        path = tmp_path / "reference.bin"
        save_reference(path, ref)
        loaded = load_reference(path)
        assert loaded.dims == 12 and len(loaded) == 5
        assert np.allclose(loaded.matrix(), ref.matrix(), atol=1e-6)
        assert loaded.provenance == str(path)

    def test_loaded_rows_are_unit_norm(self, tmp_path):
        rng = np.random.default_rng(76)
        ref = make_reference(rng, count=3, dims=6)
        path = tmp_path / "reference.bin"
        save_reference(path, ref)
        for row in load_reference(path).embeddings:
            assert abs(np.linalg.norm(row.values) - 1.0) <= 1e-12

    def test_truncated_file_rejected(self, tmp_path):
        path = tmp_path / "short.bin"
        path.write_bytes(b"CR")
        with pytest.raises(ValueError):
            load_reference(path)

    def test_bad_magic_rejected(self, tmp_path):
        rng = np.random.default_rng(77)
        path = tmp_path / "ref.bin"
        save_reference(path, make_reference(rng))
        data = bytearray(path.read_bytes())
        data[0] = ord("X")
        path.write_bytes(bytes(data))
        with pytest.raises(ValueError):
            load_reference(path)

    def test_size_mismatch_rejected(self, tmp_path):
        rng = np.random.default_rng(78)
        path = tmp_path / "ref.bin"
        save_reference(path, make_reference(rng))
        path.write_bytes(path.read_bytes() + b"\x00\x00\x00\x00")
        with pytest.raises(ValueError):
            load_reference(path)
