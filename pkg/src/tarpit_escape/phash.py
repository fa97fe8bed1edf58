"""Difference hashing (dHash) over 8-bit grayscale bitmaps.

The hash is the canonical 64-bit variant: the image is area-averaged down to a
9x8 grid (9 columns, 8 rows) and bit ``i*8 + j`` is set when grid cell
``(i, j)`` is strictly brighter than its right neighbour ``(i, j+1)``.

Downsampling is done in exact integer arithmetic so hashes are bit-identical
on every platform.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

GRID_COLS = 9
GRID_ROWS = 8
HASH_BITS = 64

MIN_WIDTH = GRID_COLS
MIN_HEIGHT = GRID_ROWS


class BitmapError(ValueError):
    """Raised for malformed bitmaps (too small, wrong pixel count)."""


class ThresholdError(ValueError):
    """Raised when a similarity threshold lies outside (0, 1]."""


@dataclass(frozen=True, eq=False)
class Bitmap:
    """Row-major 8-bit grayscale image."""

    width: int
    height: int
    pixels: bytes = field(repr=False)

    def __post_init__(self) -> None:
        if self.width < MIN_WIDTH or self.height < MIN_HEIGHT:
            raise BitmapError(
                f"bitmap {self.width}x{self.height} is smaller than the "
                f"{MIN_WIDTH}x{MIN_HEIGHT} hash grid"
            )
        if len(self.pixels) != self.width * self.height:
            raise BitmapError(
                f"expected {self.width * self.height} pixels, got {len(self.pixels)}"
            )

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "Bitmap":
        arr = np.asarray(arr)
        if arr.ndim != 2:
            raise BitmapError(f"expected a 2-D array, got shape {arr.shape}")
        if arr.size and (arr.min() < 0 or arr.max() > 255):
            raise BitmapError("pixel values must lie in [0, 255]")
        h, w = arr.shape
        return cls(w, h, np.ascontiguousarray(arr, dtype=np.uint8).tobytes())

    @classmethod
    def from_rgb(cls, arr: np.ndarray) -> "Bitmap":
        """Convert an HxWx3 RGB array using integer luma (0.299R + 0.587G + 0.114B)."""
        arr = np.asarray(arr, dtype=np.int64)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise BitmapError(f"expected an HxWx3 array, got shape {arr.shape}")
        luma = (299 * arr[..., 0] + 587 * arr[..., 1] + 114 * arr[..., 2] + 500) // 1000
        return cls.from_array(luma)

    def to_array(self) -> np.ndarray:
        return np.frombuffer(self.pixels, dtype=np.uint8).reshape(self.height, self.width)

    def inverted(self) -> "Bitmap":
        return Bitmap(self.width, self.height, bytes(255 - b for b in self.pixels))

    @functools.cached_property
    def phash(self) -> "PHash":
        # cached_property writes straight to __dict__, which works on frozen dataclasses
        return dhash(self)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Bitmap):
            return NotImplemented
        return (self.width, self.height, self.pixels) == (other.width, other.height, other.pixels)

    def __hash__(self) -> int:
        return hash((self.width, self.height, self.pixels))


@dataclass(frozen=True, order=True)
class PHash:
    bits: int

    def __post_init__(self) -> None:
        if not 0 <= self.bits < (1 << HASH_BITS):
            raise ValueError(f"hash value {self.bits:#x} does not fit in {HASH_BITS} bits")

    def bit(self, row: int, col: int) -> int:
        return (self.bits >> (row * 8 + col)) & 1

    def hex(self) -> str:
        return f"{self.bits:016x}"

    @classmethod
    def from_hex(cls, text: str) -> "PHash":
        return cls(int(text, 16))

    def __len__(self) -> int:
        return HASH_BITS


@functools.lru_cache(maxsize=64)
def _area_weights(size: int, cells: int) -> np.ndarray:
    # weight[c, p] = overlap of pixel p with cell c, both scaled by `cells`
    # so every boundary lands on an integer; each row sums to `size`.
    p = np.arange(size)
    c = np.arange(cells)[:, None]
    lo = np.maximum(p * cells, c * size)
    hi = np.minimum((p + 1) * cells, (c + 1) * size)
    return np.clip(hi - lo, 0, None).astype(np.int64)


def downsample(img: Bitmap) -> np.ndarray:
    """Area-averaged 8x9 grid of ``img``, rounded half-up to integers."""
    arr = img.to_array().astype(np.int64)
    wy = _area_weights(img.height, GRID_ROWS)
    wx = _area_weights(img.width, GRID_COLS)
    sums = wy @ arr @ wx.T
    area = img.width * img.height
    return (2 * sums + area) // (2 * area)


def dhash(img: Bitmap) -> PHash:
    grid = downsample(img)
    diff = (grid[:, :-1] > grid[:, 1:]).ravel()
    weights = np.left_shift(np.uint64(1), np.arange(HASH_BITS, dtype=np.uint64))
    return PHash(int(np.bitwise_or.reduce(weights[diff], initial=np.uint64(0))))


def hamming(a: PHash, b: PHash) -> int:
    return (a.bits ^ b.bits).bit_count()


def hash_similarity(a: PHash, b: PHash) -> float:
    return 1.0 - hamming(a, b) / HASH_BITS


def similarity(a: Bitmap, b: Bitmap) -> float:
    """Score in [0, 1]; 1.0 means identical hashes."""
    return hash_similarity(a.phash, b.phash)


def check_threshold(theta: float) -> float:
    if not 0.0 < theta <= 1.0:
        raise ThresholdError(f"similarity threshold must lie in (0, 1], got {theta}")
    return theta


def is_ui_similar(a: Bitmap, b: Bitmap, theta: float) -> bool:
    check_threshold(theta)
    return similarity(a, b) >= theta


def read_pgm(path: str | Path) -> Bitmap:
    """Load a binary (P5) 8-bit PGM file."""
    data = Path(path).read_bytes()
    tokens: list[bytes] = []
    pos = 0
    while len(tokens) < 4:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise BitmapError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    if tokens[0] != b"P5":
        raise BitmapError(f"{path}: not a binary PGM (magic {tokens[0]!r})")
    width, height, maxval = (int(t) for t in tokens[1:])
    if maxval != 255:
        raise BitmapError(f"{path}: only 8-bit PGM is supported (maxval {maxval})")
    pos += 1  # single whitespace byte after maxval
    pixels = data[pos : pos + width * height]
    return Bitmap(width, height, pixels)


def write_pgm(img: Bitmap, path: str | Path) -> None:
    header = f"P5\n{img.width} {img.height}\n255\n".encode("ascii")
    Path(path).write_bytes(header + img.pixels)
