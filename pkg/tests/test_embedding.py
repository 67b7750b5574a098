"""Embedding providers: determinism, cache transparency, batch semantics."""

import hashlib

import numpy as np
import pytest

import curator.embedding as embedding_module
from curator.embedding import (
    BatchEncodeResult,
    DeterministicBackend,
    EmbeddingCache,
    EmbeddingProvider,
    ProviderConfig,
    RemoteBackend,
    RemoteItemErrors,
)
from curator.errors import DecodeError, ProviderUnavailable

from conftest import noise_png


class TestProviderConfig:
    def test_rejects_unknown_backend(self):
        with pytest.raises(ValueError):
            ProviderConfig(backend="magic", dims=8, cache_dir="c")

    def test_rejects_tiny_dims(self):
        with pytest.raises(ValueError):
            ProviderConfig(backend="deterministic", dims=1, cache_dir="c")

    def test_remote_requires_endpoint(self):
        with pytest.raises(ValueError):
            ProviderConfig(backend="remote", dims=8, cache_dir="c")

    def test_deterministic_rejects_endpoint(self):
        with pytest.raises(ValueError):
            ProviderConfig(
                backend="deterministic",
                dims=8,
                cache_dir="c",
                endpoint="http://example.test",
            )


class TestDeterministicBackend:
    def test_same_bytes_same_vector(self, det_provider):
        provider = det_provider(dims=16)
        rng = np.random.default_rng(21)
        for _ in range(10):
            data = noise_png(rng)
            v1 = provider.encode(data)
            v2 = provider.encode(data)
            assert np.array_equal(v1.values, v2.values)

    def test_distinct_bytes_distinct_vectors(self, det_provider):
        provider = det_provider(dims=16)
        rng = np.random.default_rng(22)
        a = provider.encode(noise_png(rng))
        b = provider.encode(noise_png(rng))
        assert float(a.values @ b.values) < 1.0

    def test_unit_norm(self, det_provider):
        provider = det_provider(dims=32)
        rng = np.random.default_rng(23)
        for _ in range(20):
            v = provider.encode(noise_png(rng))
            assert abs(np.linalg.norm(v.values) - 1.0) < 1e-6

    def test_vector_is_pure_function_of_bytes(self, det_provider, tmp_path):
        # Two separate providers over separate caches agree bit for bit.
        rng = np.random.default_rng(24)
        blobs = [noise_png(rng) for _ in range(8)]
        first = det_provider(dims=16, subdir="cache-a")
        second = det_provider(dims=16, subdir="cache-b")
        for data in sorted(blobs, key=lambda b: hashlib.sha256(b).hexdigest()):
            assert np.array_equal(
                first.encode(data).values, second.encode(data).values
            )

    def test_configured_dims_respected(self, det_provider):
        rng = np.random.default_rng(25)
        data = noise_png(rng)
        assert det_provider(dims=8, subdir="c8").encode(data).dims == 8
        assert det_provider(dims=64, subdir="c64").encode(data).dims == 64


class TestCache:
    def test_warm_encode_skips_backend_and_matches(self, det_provider):
        provider = det_provider(dims=16)
        rng = np.random.default_rng(26)
        data = noise_png(rng)
        cold = provider.encode(data)
        calls_after_cold = provider.backend_calls
        warm = provider.encode(data)
        assert provider.backend_calls == calls_after_cold
        assert np.array_equal(cold.values, warm.values)

    def test_cache_survives_provider_restart(self, tmp_path):
        config = ProviderConfig(
            backend="deterministic", dims=16, cache_dir=str(tmp_path / "c")
        )
        rng = np.random.default_rng(27)
        data = noise_png(rng)
        first = EmbeddingProvider(config).encode(data)
        fresh = EmbeddingProvider(config)
        second = fresh.encode(data)
        assert fresh.backend_calls == 0
        assert np.array_equal(first.values, second.values)

    def test_cache_file_layout(self, tmp_path):
        config = ProviderConfig(
            backend="deterministic", dims=8, cache_dir=str(tmp_path / "c")
        )
        provider = EmbeddingProvider(config)
        rng = np.random.default_rng(28)
        data = noise_png(rng)
        provider.encode(data)
        files = [p for p in (tmp_path / "c").iterdir() if not p.name.startswith(".")]
        assert len(files) == 1
        assert len(files[0].name) == 64
        int(files[0].name, 16)  # hex digest filename
        stored = np.frombuffer(files[0].read_bytes(), dtype="<f4")
        assert stored.shape == (8,)

    def test_key_depends_on_backend_and_dims(self):
        data = b"same-bytes"
        k1 = EmbeddingCache.key(data, "deterministic", 8)
        k2 = EmbeddingCache.key(data, "deterministic", 16)
        k3 = EmbeddingCache.key(data, "remote:http://x", 8)
        assert len({k1, k2, k3}) == 3

    def test_stale_dims_entry_recomputed(self, tmp_path):
        cache = EmbeddingCache(tmp_path / "c")
        cache.put("deadbeef", np.ones(4, dtype=np.float32))
        assert cache.get("deadbeef", 4) is not None
        assert cache.get("deadbeef", 8) is None


class TestBatchEncoding:
    def test_order_preserved(self, det_provider):
        provider = det_provider(dims=16)
        rng = np.random.default_rng(29)
        blobs = [noise_png(rng) for _ in range(7)]
        singles = [provider.encode(b) for b in blobs]
        batch = provider.encode_batch(blobs, batch_size=3)
        assert batch.ok
        for single, batched in zip(singles, batch.vectors):
            assert np.array_equal(single.values, batched.values)

    def test_partial_failures_reported_per_item(self, det_provider):
        provider = det_provider(dims=16)
        rng = np.random.default_rng(30)
        blobs = [noise_png(rng), b"not an image", noise_png(rng)]
        result = provider.encode_batch(blobs)
        assert set(result.errors) == {1}
        assert result.vectors[1] is None
        assert result.vectors[0] is not None and result.vectors[2] is not None

    def test_encode_raises_on_garbage(self, det_provider):
        with pytest.raises(DecodeError):
            det_provider(dims=16).encode(b"\x00\x01\x02")

    def test_empty_batch(self, det_provider):
        result = det_provider(dims=16).encode_batch([])
        assert result.vectors == [] and result.ok


class _FakeResponse:
    def __init__(self, status_code, body):
        self.status_code = status_code
        self._body = body

    def json(self):
        return self._body


class TestRemoteBackend:
    def test_success_round_trip(self, monkeypatch):
        backend = RemoteBackend("http://embed.test/", dims=4)
        assert backend.endpoint == "http://embed.test"
        captured = {}

        def fake_post(url, json=None, timeout=None):
            captured["url"] = url
            captured["n"] = len(json["images"])
            return _FakeResponse(
                200, {"vectors": [[1.0, 0.0, 0.0, 0.0]] * captured["n"], "dims": 4}
            )

        monkeypatch.setattr(embedding_module.requests, "post", fake_post)
        raws = backend.embed_raw([b"a", b"b"])
        assert captured["url"] == "http://embed.test/v1/embed"
        assert captured["n"] == 2
        assert len(raws) == 2

    def test_item_rejections_surface_indices(self, monkeypatch):
        backend = RemoteBackend("http://embed.test", dims=4)
        monkeypatch.setattr(
            embedding_module.requests,
            "post",
            lambda *a, **k: _FakeResponse(
                422, {"errors": [{"index": 1, "detail": "corrupt"}]}
            ),
        )
        with pytest.raises(RemoteItemErrors) as excinfo:
            backend.embed_raw([b"a", b"b"])
        assert excinfo.value.errors == {1: "corrupt"}

    def test_server_error_is_unavailable(self, monkeypatch):
        backend = RemoteBackend("http://embed.test", dims=4)
        monkeypatch.setattr(
            embedding_module.requests, "post", lambda *a, **k: _FakeResponse(500, {})
        )
        with pytest.raises(ProviderUnavailable):
            backend.embed_raw([b"a"])

    def test_network_failure_is_unavailable(self, monkeypatch):
        backend = RemoteBackend("http://embed.test", dims=4)

        def boom(*a, **k):
            raise embedding_module.requests.ConnectionError("no route")

        monkeypatch.setattr(embedding_module.requests, "post", boom)
        with pytest.raises(ProviderUnavailable):
            backend.embed_raw([b"a"])

    def test_malformed_vector_count(self, monkeypatch):
        backend = RemoteBackend("http://embed.test", dims=4)
        monkeypatch.setattr(
            embedding_module.requests,
            "post",
            lambda *a, **k: _FakeResponse(200, {"vectors": [[1.0, 0.0, 0.0, 0.0]]}),
        )
        with pytest.raises(ProviderUnavailable):
            backend.embed_raw([b"a", b"b"])


class _ScriptedBackend:
    """Backend double that rejects configured blobs and counts calls."""

    def __init__(self, dims, reject: set[bytes]):
        self.dims = dims
        self.backend_id = "scripted"
        self.reject = reject
        self.calls = 0

    def embed_raw(self, images):
        self.calls += 1
        rejected = {
            i: "scripted rejection"
            for i, data in enumerate(images)
            if bytes(data) in self.reject
        }
        if rejected:
            raise RemoteItemErrors(rejected)
        out = []
        for data in images:
            digest = hashlib.blake2b(bytes(data), digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out.append(rng.standard_normal(self.dims))
        return out


class TestPartialBatchRecovery:
    def test_rejected_items_do_not_sink_the_chunk(self, tmp_path):
        rng = np.random.default_rng(31)
        blobs = [noise_png(rng) for _ in range(5)]
        config = ProviderConfig(
            backend="remote",
            dims=8,
            cache_dir=str(tmp_path / "c"),
            endpoint="http://unused.test",
            batch_size=5,
        )
        backend = _ScriptedBackend(8, reject={blobs[1], blobs[3]})
        provider = EmbeddingProvider(config, backend=backend)
        result = provider.encode_batch(blobs)
        assert set(result.errors) == {1, 3}
        for i in (0, 2, 4):
            assert result.vectors[i] is not None
            assert abs(np.linalg.norm(result.vectors[i].values) - 1.0) < 1e-6

    def test_wrong_dims_from_backend_reported(self, tmp_path):
        rng = np.random.default_rng(32)
        data = noise_png(rng)

        class WrongDims:
            dims = 8
            backend_id = "wrong"
            calls = 0

            def embed_raw(self, images):
                return [np.ones(5) for _ in images]

        config = ProviderConfig(
            backend="remote",
            dims=8,
            cache_dir=str(tmp_path / "c"),
            endpoint="http://unused.test",
        )
        provider = EmbeddingProvider(config, backend=WrongDims())
        result = provider.encode_batch([data])
        assert 0 in result.errors
        assert "dims" in result.errors[0]


class TestCacheColdWarmIdentity:
    def test_cold_and_warm_paths_bit_identical(self, tmp_path):
        # The cache stores the float32 stage of the canonical numeric path,
        # so a cache hit reproduces the cold result exactly.
        config = ProviderConfig(
            backend="deterministic", dims=24, cache_dir=str(tmp_path / "c")
        )
        provider = EmbeddingProvider(config)
        rng = np.random.default_rng(33)
        blobs = [noise_png(rng) for _ in range(10)]
        cold = [provider.encode(b) for b in blobs]
        warm = [provider.encode(b) for b in blobs]
        for c, w in zip(cold, warm):
            assert c.values.tobytes() == w.values.tobytes()
