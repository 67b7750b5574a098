"""Run the checkpointed pipeline end to end on a generated toy manifest.

Writes a manifest of file:// URLs (with planted copies and one dead link),
an INI config, and a reference file, then runs ingest -> embed -> filter
-> dedup twice.  The second run replays from checkpoints and reproduces
the reports byte for byte.
"""

import json
import tempfile
import time
from pathlib import Path

import numpy as np
from PIL import Image

from curator.core import EmbeddingVector, ReferenceSet
from curator.filtering import save_reference
from curator.pipeline import load_config, run_pipeline


def build_manifest(workdir: Path) -> Path:
    rng = np.random.default_rng(21)
    src = workdir / "src"
    src.mkdir()
    lines = []
    for i in range(8):
        pixels = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
        path = src / f"u{i}.png"
        Image.fromarray(pixels, mode="RGB").save(path, format="PNG")
        lines.append(json.dumps({"id": f"img-{i:02d}", "url": path.as_uri()}))
    copy = src / "copy0.png"
    copy.write_bytes((src / "u0.png").read_bytes())
    lines.append(json.dumps({"id": "copy-00", "url": copy.as_uri()}))
    lines.append(json.dumps({"id": "dead-00", "url": (src / "gone.png").as_uri()}))
    manifest = workdir / "manifest.jsonl"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest


def report_bytes(output_dir: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted((output_dir / "reports").iterdir())}


def main():
    workdir = Path(tempfile.mkdtemp(prefix="curator-demo-"))
    print(f"workspace: {workdir}")
    manifest = build_manifest(workdir)

    rng = np.random.default_rng(22)
    reference = workdir / "reference.bin"
    vectors = []
    for _ in range(4):
        raw = rng.standard_normal(16)
        vectors.append(EmbeddingVector(raw / np.linalg.norm(raw)))
    save_reference(reference, ReferenceSet(embeddings=tuple(vectors), provenance="demo"))

    ini = workdir / "run.ini"
    ini.write_text(
        "[pipeline]\n"
        "seed = 5\n"
        "stages = ingest, embed, filter, dedup\n"
        f"output_dir = {workdir / 'out'}\n"
        "[ingest]\n"
        f"manifest = {manifest}\n"
        f"corpus_dir = {workdir / 'corpus'}\n"
        "[embed]\n"
        "dims = 16\n"
        f"cache_dir = {workdir / 'cache'}\n"
        "[filter]\n"
        "rho = -1.0\n"
        "prefilter_floor = -1.0\n"
        f"reference_path = {reference}\n"
        "[dedup]\n"
        "method = phash\n"
        "max_hamming = 8\n",
        encoding="utf-8",
    )
    config = load_config(ini)

    print()
    print("== First run ==")
    started = time.perf_counter()
    summary = run_pipeline(config)
    first_elapsed = time.perf_counter() - started
    for key, value in summary.to_dict().items():
        print(f"  {key:<10}{value}")
    print(f"  wall time  {first_elapsed:.2f}s")

    print()
    print("== Second run (checkpoints) ==")
    started = time.perf_counter()
    replay = run_pipeline(config)
    second_elapsed = time.perf_counter() - started
    print(f"  wall time  {second_elapsed:.2f}s")
    print(f"  summary identical: {replay == summary}")
    first_reports = report_bytes(Path(config.output_dir))
    print(f"  reports byte-identical: {report_bytes(Path(config.output_dir)) == first_reports}")

    print()
    print(f"reports under {Path(config.output_dir) / 'reports'}:")
    for name in sorted(first_reports):
        print(f"  {name}")
    print(f"survivor corpus: {Path(config.output_dir) / 'survivors' / 'records.jsonl'}")


if __name__ == "__main__":
    main()
