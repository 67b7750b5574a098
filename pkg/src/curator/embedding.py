"""Pluggable image-encoding backends behind a content-addressed cache.

Two backends implement the same contract: a remote-inference client speaking
the `/v1/embed` wire protocol, and a deterministic local backend that derives
a stable pseudo-random vector from the image bytes (used for testing and for
exercising filter/dedup logic without model weights).

The canonical numeric path is: raw backend floats -> float32 -> normalize in
float64.  The cache stores the float32 stage, so cold and warm lookups yield
bit-identical vectors.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import requests
from PIL import Image, UnidentifiedImageError

from .core import EmbeddingVector, normalize
from .errors import DecodeError, ProviderUnavailable

_CACHE_SALT = b"curator-embed-v1"


@dataclass(frozen=True)
class ProviderConfig:
    """Configuration for an embedding provider."""

    backend: str  # "remote" or "deterministic"
    dims: int
    cache_dir: str
    endpoint: Optional[str] = None
    batch_size: int = 32

    def __post_init__(self):
        if self.backend not in ("remote", "deterministic"):
            raise ValueError(f"unknown backend {self.backend!r}")
        if self.dims < 2:
            raise ValueError("dims must be >= 2")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if (self.backend == "remote") != (self.endpoint is not None):
            raise ValueError("endpoint is required iff backend is remote")


def check_decodable(image_bytes: bytes) -> None:
    """Raise DecodeError unless the bytes parse as an image."""
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            img.verify()
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"bytes do not decode as an image: {exc}") from exc


class DeterministicBackend:
    """Stable embeddings derived purely from the image bytes.

    Seeds a PCG64 generator with a 64-bit digest of the bytes and draws
    `dims` values from a standard normal, so distinct inputs are
    collision-improbable and identical inputs are bit-stable.
    """

    def __init__(self, dims: int):
        self.dims = dims
        self.backend_id = "deterministic"
        self.calls = 0

    def embed_raw(self, images: Sequence[bytes]) -> list[np.ndarray]:
        self.calls += 1
        out = []
        for data in images:
            digest = hashlib.blake2b(data, digest_size=8).digest()
            rng = np.random.default_rng(int.from_bytes(digest, "little"))
            out.append(rng.standard_normal(self.dims))
        return out


class RemoteBackend:
    """Client for a remote inference server.

    Wire protocol: POST {endpoint}/v1/embed with {"images": [base64, ...]};
    200 -> {"vectors": [[float, ...], ...], "dims": int} on full success;
    422 -> {"errors": [{"index": int, "detail": str}, ...]}.
    """

    def __init__(self, endpoint: str, dims: int, timeout: float = 30.0):
        self.endpoint = endpoint.rstrip("/")
        self.dims = dims
        self.timeout = timeout
        self.backend_id = f"remote:{self.endpoint}"
        self.calls = 0

    def _post(self, images: Sequence[bytes]) -> requests.Response:
        payload = {"images": [base64.b64encode(b).decode("ascii") for b in images]}
        try:
            return requests.post(
                f"{self.endpoint}/v1/embed", json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise ProviderUnavailable(f"embedding endpoint unreachable: {exc}") from exc

    def embed_raw(self, images: Sequence[bytes]) -> list[np.ndarray]:
        """Embed a batch; raises RemoteItemErrors when the server rejects items."""
        self.calls += 1
        resp = self._post(images)
        if resp.status_code == 200:
            body = resp.json()
            vectors = body.get("vectors")
            if not isinstance(vectors, list) or len(vectors) != len(images):
                raise ProviderUnavailable(
                    f"malformed response: expected {len(images)} vectors"
                )
            return [np.asarray(v, dtype=np.float64) for v in vectors]
        if resp.status_code == 422:
            body = resp.json()
            errors = {
                int(e["index"]): str(e.get("detail", "rejected"))
                for e in body.get("errors", [])
            }
            raise RemoteItemErrors(errors)
        raise ProviderUnavailable(
            f"embedding endpoint returned status {resp.status_code}"
        )


class RemoteItemErrors(Exception):
    """Carries the per-index error list of a 422 response."""

    def __init__(self, errors: dict[int, str]):
        super().__init__(f"{len(errors)} item(s) rejected by the backend")
        self.errors = errors


class EmbeddingCache:
    """One file per key under cache_dir: little-endian float32 array, filename = hex digest."""

    def __init__(self, cache_dir: str | Path):
        self.dir = Path(cache_dir)
        self.dir.mkdir(parents=True, exist_ok=True)

    @staticmethod
    def key(image_bytes: bytes, backend_id: str, dims: int) -> str:
        h = hashlib.sha256()
        h.update(_CACHE_SALT)
        h.update(backend_id.encode("utf-8"))
        h.update(dims.to_bytes(4, "little"))
        h.update(hashlib.sha256(image_bytes).digest())
        return h.hexdigest()

    def get(self, key: str, dims: int) -> Optional[np.ndarray]:
        path = self.dir / key
        try:
            raw = path.read_bytes()
        except FileNotFoundError:
            return None
        arr = np.frombuffer(raw, dtype="<f4")
        if arr.shape[0] != dims:
            return None  # stale entry from another configuration; recompute
        return arr

    def put(self, key: str, values: np.ndarray) -> None:
        # Atomic write: concurrent computes of the same key are identical by
        # determinism, so last-write-wins is safe.
        data = np.asarray(values, dtype="<f4").tobytes()
        fd, tmp = tempfile.mkstemp(dir=self.dir, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as f:
                f.write(data)
            os.replace(tmp, self.dir / key)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


@dataclass
class BatchEncodeResult:
    """Outcome of encode_batch: vectors aligned with the input order.

    Failed items hold None in `vectors` and a message in `errors` keyed by
    input index.
    """

    vectors: list[Optional[EmbeddingVector]]
    errors: dict[int, str] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return not self.errors


class EmbeddingProvider:
    """Front door for encoding images: cache, backend dispatch, normalization."""

    def __init__(self, config: ProviderConfig, backend=None):
        self.config = config
        if backend is not None:
            self.backend = backend
        elif config.backend == "deterministic":
            self.backend = DeterministicBackend(config.dims)
        else:
            self.backend = RemoteBackend(config.endpoint, config.dims)
        self.cache = EmbeddingCache(config.cache_dir)

    @property
    def backend_calls(self) -> int:
        return self.backend.calls

    def _finalize(self, raw_f32: np.ndarray) -> EmbeddingVector:
        return normalize(np.asarray(raw_f32, dtype=np.float64))

    def encode(self, image_bytes: bytes) -> EmbeddingVector:
        """Encode one image; identical bytes always yield identical vectors."""
        result = self.encode_batch([image_bytes])
        if 0 in result.errors:
            raise DecodeError(result.errors[0])
        return result.vectors[0]

    def encode_batch(
        self, images: Sequence[bytes], batch_size: Optional[int] = None
    ) -> BatchEncodeResult:
        """Encode a batch, preserving input order.

        Partial failures (undecodable bytes, items rejected by the remote
        backend) are reported per index; successful items are still returned.
        A fully unreachable backend raises ProviderUnavailable.
        """
        batch_size = batch_size or self.config.batch_size
        if batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        vectors: list[Optional[EmbeddingVector]] = [None] * len(images)
        errors: dict[int, str] = {}

        pending: list[int] = []
        keys: dict[int, str] = {}
        for i, data in enumerate(images):
            try:
                check_decodable(data)
            except DecodeError as exc:
                errors[i] = str(exc)
                continue
            key = self.cache.key(data, self.backend.backend_id, self.config.dims)
            keys[i] = key
            cached = self.cache.get(key, self.config.dims)
            if cached is not None:
                vectors[i] = self._finalize(cached)
            else:
                pending.append(i)

        for start in range(0, len(pending), batch_size):
            chunk = pending[start : start + batch_size]
            self._encode_chunk(images, chunk, keys, vectors, errors)
        return BatchEncodeResult(vectors=vectors, errors=errors)

    def _encode_chunk(self, images, chunk, keys, vectors, errors) -> None:
        try:
            raws = self.backend.embed_raw([images[i] for i in chunk])
        except RemoteItemErrors as exc:
            # The server rejected some indices wholesale; retry the remainder
            # one by one so every good item still gets a vector.
            for pos, i in enumerate(chunk):
                if pos in exc.errors:
                    errors[i] = exc.errors[pos]
                else:
                    self._encode_chunk(images, [i], keys, vectors, errors)
            return
        for i, raw in zip(chunk, raws):
            raw_f32 = np.asarray(raw, dtype=np.float32)
            try:
                vec = self._finalize(raw_f32)
            except Exception as exc:
                errors[i] = f"backend returned an unusable vector: {exc}"
                continue
            if vec.dims != self.config.dims:
                errors[i] = f"backend returned dims {vec.dims}, expected {self.config.dims}"
                continue
            self.cache.put(keys[i], raw_f32)
            vectors[i] = vec
