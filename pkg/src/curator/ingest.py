"""Manifest loading, concurrent image fetching, and crowdsource imports.

Fetching runs a bounded worker pool; each worker downloads and validates
one record's bytes, and the main thread performs the single-writer commit
(write file, set local_path).  Individual failures are report entries, not
fatal errors, because dead links dominate at crawl scale.
"""

from __future__ import annotations

import hashlib
import io
import json
import socket
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence
from urllib.parse import urlparse
from urllib.request import url2pathname

import requests
from PIL import Image, UnidentifiedImageError

from .core import SEA_COUNTRIES, ImageRecord, Source
from .errors import EmptyManifestError

FAILURE_CAUSES = ("dns", "timeout", "http_error", "not_an_image", "too_large")

DEFAULT_TIMEOUT = 30.0
DEFAULT_MAX_BYTES = 20 * 1024 * 1024
_CHUNK = 64 * 1024

_EXT_BY_FORMAT = {"jpeg": "jpg", "png": "png", "gif": "gif", "webp": "webp", "bmp": "bmp"}


@dataclass(frozen=True)
class FetchReport:
    """Accounting for one fetch run."""

    attempted: int
    succeeded: int
    failed_by_cause: dict[str, int]
    elapsed: float

    def __post_init__(self):
        total_failed = sum(self.failed_by_cause.values())
        if self.succeeded + total_failed != self.attempted:
            raise ValueError(
                f"inconsistent report: {self.succeeded} + {total_failed} != {self.attempted}"
            )

    @property
    def success_rate(self) -> float:
        return self.succeeded / self.attempted if self.attempted else 0.0

    def render_text(self) -> str:
        lines = [
            f"attempted     {self.attempted}",
            f"succeeded     {self.succeeded}",
            f"success rate  {self.success_rate * 100:.2f}%",
        ]
        for cause in FAILURE_CAUSES:
            n = self.failed_by_cause.get(cause, 0)
            if n:
                lines.append(f"  {cause:<12}{n}")
        return "\n".join(lines)


@dataclass
class ManifestLoad:
    records: list[ImageRecord]
    skipped: int = 0


@dataclass
class CrowdsourceImport:
    records: list[ImageRecord]
    rejected: list[tuple[int, str]] = field(default_factory=list)


def _manifest_id(url: str) -> str:
    return "crawl-" + hashlib.sha256(url.encode("utf-8")).hexdigest()[:16]


def load_manifest(path) -> ManifestLoad:
    """Read a newline-delimited manifest of crawl URLs.

    Each valid line becomes a crawled ImageRecord; malformed lines are
    counted and skipped.  Raises EmptyManifestError when nothing is valid.
    """
    text = Path(path).read_text(encoding="utf-8")
    records: list[ImageRecord] = []
    seen_ids: set[str] = set()
    skipped = 0
    for line in text.splitlines():
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
            url = obj["url"]
            if not isinstance(url, str) or not url:
                raise ValueError("url must be a non-empty string")
            record_id = obj.get("id") or _manifest_id(url)
            if record_id in seen_ids:
                raise ValueError(f"duplicate id {record_id!r}")
            regions = frozenset(obj.get("regions") or ())
            record = ImageRecord(
                id=record_id,
                source=Source.CRAWLED,
                url=url,
                caption_en=obj.get("caption"),
                regions=regions,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError):
            skipped += 1
            continue
        seen_ids.add(record_id)
        records.append(record)
    if not records:
        raise EmptyManifestError(f"no valid records in {path}")
    return ManifestLoad(records=records, skipped=skipped)


def import_crowdsource(export_path) -> CrowdsourceImport:
    """Read a crowdsource form export.

    Records must carry caption_en and at least one region; anything else is
    rejected with a per-record diagnostic (1-based line numbers).
    """
    text = Path(export_path).read_text(encoding="utf-8")
    out = CrowdsourceImport(records=[])
    seen_ids: set[str] = set()
    for line_no, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            out.rejected.append((line_no, f"invalid json: {exc}"))
            continue
        record_id = obj.get("id")
        if not record_id:
            out.rejected.append((line_no, "missing id"))
            continue
        if record_id in seen_ids:
            out.rejected.append((line_no, f"duplicate id {record_id!r}"))
            continue
        if not obj.get("caption_en"):
            out.rejected.append((line_no, "missing caption_en"))
            continue
        regions = frozenset(obj.get("regions") or ())
        if not regions:
            out.rejected.append((line_no, "missing regions"))
            continue
        if regions - SEA_COUNTRIES:
            out.rejected.append(
                (line_no, f"unknown regions {sorted(regions - SEA_COUNTRIES)}")
            )
            continue
        if not obj.get("file"):
            out.rejected.append((line_no, "missing file"))
            continue
        seen_ids.add(record_id)
        out.records.append(
            ImageRecord(
                id=record_id,
                source=Source.CROWDSOURCED,
                local_path=str(obj["file"]),
                caption_en=obj["caption_en"],
                caption_native=obj.get("caption_native"),
                native_language=obj.get("native_language"),
                regions=regions,
                pii_cleared=bool(obj.get("pii_cleared", False)),
            )
        )
    return out


def _classify_transport_error(exc: Exception) -> str:
    cause: Optional[BaseException] = exc
    while cause is not None:
        if isinstance(cause, socket.gaierror):
            return "dns"
        if type(cause).__name__ == "NameResolutionError":
            return "dns"
        cause = cause.__cause__ or cause.__context__
    return "http_error"


def _validate_image_bytes(data: bytes) -> Optional[str]:
    """Return the file extension when bytes decode as an image, else None."""
    try:
        with Image.open(io.BytesIO(data)) as img:
            img.verify()
            fmt = (img.format or "").lower()
    except (UnidentifiedImageError, OSError, ValueError):
        return None
    return _EXT_BY_FORMAT.get(fmt, fmt or "img")


def _fetch_one(url: str, timeout: float, max_bytes: int):
    """Download and validate one URL. Returns ('ok', bytes, ext) or (cause, detail)."""
    parsed = urlparse(url)
    if parsed.scheme == "file":
        try:
            data = Path(url2pathname(parsed.path)).read_bytes()
        except OSError as exc:
            return ("http_error", str(exc))
        if len(data) > max_bytes:
            return ("too_large", f"{len(data)} bytes")
        ext = _validate_image_bytes(data)
        return ("ok", data, ext) if ext else ("not_an_image", "undecodable bytes")

    retried = False
    while True:
        try:
            with requests.get(url, timeout=timeout, stream=True) as resp:
                if resp.status_code != 200:
                    return ("http_error", f"status {resp.status_code}")
                declared = resp.headers.get("Content-Length")
                if declared and declared.isdigit() and int(declared) > max_bytes:
                    return ("too_large", f"declared {declared} bytes")
                buf = io.BytesIO()
                for chunk in resp.iter_content(_CHUNK):
                    buf.write(chunk)
                    if buf.tell() > max_bytes:
                        return ("too_large", f">{max_bytes} bytes")
                data = buf.getvalue()
        except requests.Timeout:
            if not retried:  # one retry on timeout only
                retried = True
                continue
            return ("timeout", "timed out twice")
        except requests.RequestException as exc:
            return (_classify_transport_error(exc), str(exc))
        ext = _validate_image_bytes(data)
        return ("ok", data, ext) if ext else ("not_an_image", "undecodable bytes")


def fetch_images(
    corpus: Sequence[ImageRecord],
    images_dir,
    parallelism: int = 8,
    timeout: float = DEFAULT_TIMEOUT,
    max_bytes: int = DEFAULT_MAX_BYTES,
) -> FetchReport:
    """Fetch bytes for every record that still needs them.

    Records that already have a local_path are skipped entirely, so
    re-running on a fetched corpus performs zero transfers.  At most
    `parallelism` transfers are in flight at once; per-record outcomes do
    not depend on scheduling order.
    """
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    images_dir = Path(images_dir)
    images_dir.mkdir(parents=True, exist_ok=True)
    targets = [r for r in corpus if r.local_path is None]
    start = time.perf_counter()
    failures: dict[str, int] = {}
    succeeded = 0
    if targets:
        with ThreadPoolExecutor(max_workers=parallelism) as pool:
            outcomes = pool.map(
                lambda r: _fetch_one(r.url, timeout, max_bytes), targets
            )
            for record, outcome in zip(targets, outcomes):
                if outcome[0] == "ok":
                    _, data, ext = outcome
                    dest = images_dir / f"{record.id}.{ext}"
                    dest.write_bytes(data)
                    record.local_path = str(dest)
                    succeeded += 1
                else:
                    failures[outcome[0]] = failures.get(outcome[0], 0) + 1
    return FetchReport(
        attempted=len(targets),
        succeeded=succeeded,
        failed_by_cause=failures,
        elapsed=time.perf_counter() - start,
    )
