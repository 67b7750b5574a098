"""Hunt near-duplicates two ways: 64-bit perceptual hashes and embeddings.

Builds a small corpus with planted copies: one byte-identical twin, one
JPEG-recompressed twin, and unrelated originals.  Hashing survives lossy
recompression; the deterministic embedding backend only collapses
byte-identical files.  Ends with the throughput meter on both methods.
"""

import io
import tempfile
from pathlib import Path

import numpy as np
from PIL import Image

from curator.calibration import BASELINE_THROUGHPUT_IPS
from curator.core import ImageRecord, Source, hamming
from curator.dedup import DedupConfig, dedup_corpus, measure_throughput, survivors
from curator.embedding import EmbeddingProvider, ProviderConfig
from curator.phash import phash64


def smooth_png(rng, side=64) -> bytes:
    """Low-frequency image: random coarse grid upsampled, so JPEG is gentle."""
    coarse = rng.integers(40, 216, size=(4, 4, 3), dtype=np.uint8)
    img = Image.fromarray(coarse, mode="RGB").resize((side, side), Image.BILINEAR)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()


def recompress_jpeg(png_bytes: bytes, quality=90) -> bytes:
    buf = io.BytesIO()
    Image.open(io.BytesIO(png_bytes)).convert("RGB").save(
        buf, format="JPEG", quality=quality
    )
    return buf.getvalue()


def main():
    rng = np.random.default_rng(7)
    workdir = Path(tempfile.mkdtemp(prefix="curator-demo-"))
    print(f"workspace: {workdir}")
    print()

    originals = {f"orig-{i}": smooth_png(rng) for i in range(4)}
    blobs = dict(originals)
    blobs["twin-exact"] = originals["orig-0"]
    blobs["twin-jpeg"] = recompress_jpeg(originals["orig-1"])

    records = []
    for name, data in blobs.items():
        path = workdir / f"{name}.png"
        path.write_bytes(data)
        source = Source.CROWDSOURCED if name.startswith("twin") else Source.CRAWLED
        records.append(
            ImageRecord(id=name, source=source, local_path=str(path))
        )

    print("== Perceptual hashes ==")
    hashes = {name: phash64(data) for name, data in blobs.items()}
    for name, h in sorted(hashes.items()):
        print(f"  {name:<12}{h.hex()}")
    print(f"  orig-1 vs twin-jpeg hamming: "
          f"{hamming(hashes['orig-1'], hashes['twin-jpeg'])}")
    print()

    print("== Hash clustering (hamming <= 16) ==")
    config = DedupConfig(method="phash", max_hamming=16)
    clusters = dedup_corpus(records, hashes, config)
    for cluster in clusters:
        members = ", ".join(sorted(cluster.member_ids))
        print(f"  [{members}] -> keep {cluster.canonical_id}")
    kept = survivors(records, clusters)
    print(f"  survivors: {len(kept)} of {len(records)}")
    print()

    print("== Embedding clustering (cosine >= 0.95) ==")
    provider = EmbeddingProvider(
        ProviderConfig(
            backend="deterministic", dims=32, cache_dir=str(workdir / "cache")
        )
    )
    vectors = provider.encode_batch([blobs[r.id] for r in records]).vectors
    features = {r.id: v for r, v in zip(records, vectors)}
    clusters = dedup_corpus(
        records, features, DedupConfig(method="embedding", epsilon=0.95)
    )
    for cluster in clusters:
        members = ", ".join(sorted(cluster.member_ids))
        print(f"  [{members}] -> keep {cluster.canonical_id}")
    print("  the JPEG twin changed bytes, so this backend no longer pairs it")
    print()

    print("== Throughput meter ==")
    bench_blobs = [smooth_png(rng) for _ in range(200)]
    for method, kwargs in (
        ("phash", {}),
        (
            "embedding",
            {
                "provider": provider,
                "config": DedupConfig(method="embedding", epsilon=0.95),
            },
        ),
    ):
        sample = measure_throughput(method, bench_blobs, **kwargs)[0]
        baseline = BASELINE_THROUGHPUT_IPS.get(method)
        context = f"  (published pHash baseline {baseline:.2f})" if baseline else ""
        print(
            f"  {method:<10}{sample.images_processed} images in "
            f"{sample.elapsed:.3f}s = {sample.images_per_second:7.2f} img/s{context}"
        )


if __name__ == "__main__":
    main()
