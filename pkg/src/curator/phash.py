"""64-bit DCT perceptual hashing.

The hash is a pure function of the decoded pixels, pinned so that
known-answer tests are bit-exact:

1. decode, convert to RGB;
2. luma with ITU-R BT.601 weights (0.299, 0.587, 0.114), float64;
3. area-average resize to 32x32 (block boundaries at floor(i*H/32); an
   input side shorter than 32 repeats rows/columns);
4. 2-D DCT-II, plain-sum convention
   C[u, v] = sum_m sum_n p[m, n] cos(pi*u*(2m+1)/64) cos(pi*v*(2n+1)/64);
5. keep the top-left 8x8 block, round each coefficient to 6 decimals
   (keeps the bit pattern stable across DCT backends);
6. threshold at the lower median of the 64 rounded coefficients;
7. bit = (coefficient > median), row-major, coefficient (0,0) in the most
   significant bit.
"""

from __future__ import annotations

import io
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np
import scipy.fft
from PIL import Image, UnidentifiedImageError

from .core import PerceptualHash
from .errors import DecodeError

HASH_SIDE = 8
RESIZE_SIDE = 32
LUMA_WEIGHTS = (0.299, 0.587, 0.114)
_COEFF_DECIMALS = 6


def luma(rgb: np.ndarray) -> np.ndarray:
    """BT.601 luma of an (H, W, 3) array, as float64."""
    r, g, b = LUMA_WEIGHTS
    arr = np.asarray(rgb, dtype=np.float64)
    return arr[..., 0] * r + arr[..., 1] * g + arr[..., 2] * b


def _block_bounds(n_in: int, n_out: int) -> list[tuple[int, int]]:
    bounds = []
    for i in range(n_out):
        start = (i * n_in) // n_out
        end = ((i + 1) * n_in) // n_out
        if end <= start:  # upsampling: repeat the nearest source line
            end = start + 1
        bounds.append((start, end))
    return bounds

def area_resize(gray: np.ndarray, side: int = RESIZE_SIDE) -> np.ndarray:
    """Downscale by averaging disjoint floor-boundary pixel blocks."""
    h, w = gray.shape
    rows = _block_bounds(h, side)
    cols = _block_bounds(w, side)
    out = np.empty((side, side), dtype=np.float64)
    for i, (r0, r1) in enumerate(rows):
        for j, (c0, c1) in enumerate(cols):
            out[i, j] = gray[r0:r1, c0:c1].mean()
    return out


def dct2_plain(block: np.ndarray) -> np.ndarray:
    """Unscaled 2-D DCT-II (plain cosine sums, no normalization factors).

    scipy's unnormalized DCT-II carries a factor 2 per axis; dividing by 4
    recovers the plain-sum convention exactly.
    """
    return scipy.fft.dctn(np.asarray(block, dtype=np.float64), type=2) / 4.0


def hash_from_pixels(gray32: np.ndarray) -> PerceptualHash:
    """Hash an already-resized 32x32 grayscale array."""
    coeffs = dct2_plain(gray32)[:HASH_SIDE, :HASH_SIDE]
    flat = np.round(coeffs, _COEFF_DECIMALS).ravel()
    median = np.sort(flat)[flat.size // 2 - 1]  # lower median of 64 values
    bits = 0
    for idx, c in enumerate(flat):
        if c > median:
            bits |= 1 << (63 - idx)
    return PerceptualHash(bits)


def phash64(image_bytes: bytes) -> PerceptualHash:
    """Perceptual hash of encoded image bytes."""
    try:
        with Image.open(io.BytesIO(image_bytes)) as img:
            rgb = np.asarray(img.convert("RGB"))
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DecodeError(f"bytes do not decode as an image: {exc}") from exc
    gray = luma(rgb)
    return hash_from_pixels(area_resize(gray))


def phash64_file(path: str | Path) -> PerceptualHash:
    return phash64(Path(path).read_bytes())


def write_hash_sidecar(path: str | Path, hashes: Mapping[str, PerceptualHash]) -> None:
    """Write newline-delimited `id,hex16` pairs, sorted by id."""
    lines = []
    for record_id in sorted(hashes):
        if "," in record_id or "\n" in record_id:
            raise ValueError(f"record id not sidecar-safe: {record_id!r}")
        lines.append(f"{record_id},{hashes[record_id].hex()}")
    Path(path).write_text("\n".join(lines) + ("\n" if lines else ""), encoding="utf-8")


def read_hash_sidecar(path: str | Path) -> dict[str, PerceptualHash]:
    hashes: dict[str, PerceptualHash] = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        line = line.strip()
        if not line:
            continue
        record_id, _, hex_part = line.rpartition(",")
        hashes[record_id] = PerceptualHash.from_hex(hex_part)
    return hashes
