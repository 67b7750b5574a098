"""Shared factories for the test suite."""

from __future__ import annotations

import io
import math

import numpy as np
import pytest
from PIL import Image

from curator.core import ImageRecord, Source
from curator.embedding import EmbeddingProvider, ProviderConfig


def noise_png(rng: np.random.Generator, side: int = 24) -> bytes:
    pixels = rng.integers(0, 256, size=(side, side, 3), dtype=np.uint8)
    buf = io.BytesIO()
    Image.fromarray(pixels, "RGB").save(buf, format="PNG")
    return buf.getvalue()


def smooth_png(rng: np.random.Generator, side: int = 64) -> bytes:
    """Gradient plus gaussian blobs: photograph-like low-frequency content."""
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    base = (xx * rng.uniform(0.5, 2.0) + yy * rng.uniform(0.5, 2.0)) * 255 / (3 * side)
    for _ in range(int(rng.integers(2, 5))):
        cy, cx = rng.uniform(0, side, 2)
        spread = rng.uniform(4.0, 14.0)
        base += rng.uniform(40.0, 160.0) * np.exp(
            -((yy - cy) ** 2 + (xx - cx) ** 2) / (2 * spread * spread)
        )
    channels = [
        np.clip(base * rng.uniform(0.6, 1.0), 0, 255).astype(np.uint8)
        for _ in range(3)
    ]
    buf = io.BytesIO()
    Image.fromarray(np.stack(channels, axis=-1), "RGB").save(buf, format="PNG")
    return buf.getvalue()


def recompress_jpeg(png_bytes: bytes, quality: int = 90) -> bytes:
    with Image.open(io.BytesIO(png_bytes)) as img:
        buf = io.BytesIO()
        img.convert("RGB").save(buf, format="JPEG", quality=quality)
    return buf.getvalue()


def make_record(
    record_id: str,
    source: Source = Source.CRAWLED,
    local_path=None,
    **kwargs,
) -> ImageRecord:
    defaults = {"url": f"https://example.test/{record_id}.png"}
    defaults.update(kwargs)
    return ImageRecord(
        id=record_id,
        source=source,
        local_path=str(local_path) if local_path else None,
        **defaults,
    )


def unit_vector(dims: int, axis: int) -> np.ndarray:
    v = np.zeros(dims, dtype=np.float64)
    v[axis] = 1.0
    return v


def vector_with_score(score: float, dims: int, axis: int = 0) -> np.ndarray:
    """Unit vector whose cosine against the `axis` basis vector is exactly `score`."""
    v = np.zeros(dims, dtype=np.float64)
    v[axis] = score
    v[(axis + 1) % dims] = math.sqrt(max(0.0, 1.0 - score * score))
    return v


def random_unit(rng: np.random.Generator, dims: int) -> np.ndarray:
    v = rng.standard_normal(dims)
    return v / np.linalg.norm(v)


@pytest.fixture
def det_provider(tmp_path):
    def build(dims: int = 16, subdir: str = "cache") -> EmbeddingProvider:
        config = ProviderConfig(
            backend="deterministic", dims=dims, cache_dir=str(tmp_path / subdir)
        )
        return EmbeddingProvider(config)

    return build
