"""MNIST IDX ingestion and synthetic datasets for tests.

IDX layout (big endian): u32 magic, u32 count, [u32 rows, u32 cols for
images], then the raw unsigned bytes.  Gzip-wrapped files are detected by
the 1f 8b header and handled transparently.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .tensor import Rng, fork_stream

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

MNIST_MEAN = 0.1307
MNIST_STD = 0.3081


class IdxFormatError(ValueError):
    pass


@dataclass
class Dataset:
    images: np.ndarray  # (N, d) float64
    labels: np.ndarray  # (N,) int64 in [0, 9]
    split: str = "train"

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("label count != image count")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() > 9):
            raise ValueError("labels must lie in [0, 9]")
        if not np.all(np.isfinite(self.images)):
            raise ValueError("non-finite pixel values")

    def __len__(self) -> int:
        return self.images.shape[0]


def _read_bytes(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        return gzip.decompress(raw)
    return raw


def load_idx_images(path) -> np.ndarray:
    """Parse an IDX image file into a (count, rows, cols) uint8 tensor."""
    raw = _read_bytes(path)
    if len(raw) < 16:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, count, rows, cols = struct.unpack(">IIII", raw[:16])
    if magic != IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: bad image magic 0x{magic:08x} (expected 0x{IMAGE_MAGIC:08x})")
    expected = 16 + count * rows * cols
    if len(raw) != expected:
        raise IdxFormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=16).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header ({len(raw)} bytes)")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != LABEL_MAGIC:
        raise IdxFormatError(f"{path}: bad label magic 0x{magic:08x} (expected 0x{LABEL_MAGIC:08x})")
    if len(raw) != 8 + count:
        raise IdxFormatError(f"{path}: expected {8 + count} bytes, got {len(raw)}")
    labels = np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)
    if labels.size and labels.max() > 9:
        raise IdxFormatError(f"{path}: label value {labels.max()} out of range [0, 9]")
    return labels


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a (count, rows, cols) uint8 tensor as an IDX file (fixtures)."""
    images = np.asarray(images, dtype=np.uint8)
    count, rows, cols = images.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IMAGE_MAGIC, count, rows, cols))
        f.write(images.tobytes())


def write_idx_labels(path, labels: np.ndarray) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as f:
        f.write(struct.pack(">II", LABEL_MAGIC, labels.size))
        f.write(labels.tobytes())


def normalize(images: np.ndarray) -> np.ndarray:
    """Map raw bytes to ((x/255) - mean) / std, flattened per sample."""
    images = np.asarray(images, dtype=np.float64)
    flat = images.reshape(images.shape[0], -1)
    return (flat / 255.0 - MNIST_MEAN) / MNIST_STD


_SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


def find_idx_file(data_dir, stem: str) -> Path:
    for candidate in (stem, stem + ".gz"):
        p = Path(data_dir) / candidate
        if p.exists():
            return p
    raise FileNotFoundError(
        f"MNIST file {stem}[.gz] not found in {data_dir}. Download the four "
        "IDX files (train/t10k images and labels) into that directory."
    )


def load_mnist(data_dir, split: str = "train") -> Dataset:
    image_stem, label_stem = _SPLIT_FILES[split]
    images = load_idx_images(find_idx_file(data_dir, image_stem))
    labels = load_idx_labels(find_idx_file(data_dir, label_stem))
    return Dataset(images=normalize(images), labels=labels, split=split)


def synthetic_two_gaussians(n: int, d: int, separation: float, rng: Rng) -> Dataset:
    """Balanced binary blobs at +/- separation/2 along the first axis."""
    if n < 2 or d < 1:
        raise ValueError("need n >= 2 and d >= 1")
    labels = np.arange(n) % 2
    centers = np.zeros((n, d))
    centers[:, 0] = np.where(labels == 0, -separation / 2.0, separation / 2.0)
    images = centers + rng.standard_normal((n, d))
    return Dataset(images=images, labels=labels.astype(np.int64), split="train")


def batch_indices(n: int, batch_size: int, rng: Rng, epoch: int):
    """Seeded per-epoch shuffle; yields index arrays covering every sample
    exactly once (last batch may be short)."""
    order = fork_stream(rng, epoch).permutation(n)
    for start in range(0, n, batch_size):
        yield order[start:start + batch_size]
