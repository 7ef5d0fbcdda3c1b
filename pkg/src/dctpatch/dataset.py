"""MNIST loading and preprocessing into 32x32 pixel or DCT-coefficient samples."""
from __future__ import annotations

import io
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Literal

import numpy as np

from .dct_core import build_dct_matrix, forward_dct_batch

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

PATCH_SIZE = 32
DEFAULT_TAU = 0.02

MNIST_FILES = {
    "train": ("train-images.idx3-ubyte", "train-labels.idx1-ubyte"),
    "test": ("t10k-images.idx3-ubyte", "t10k-labels.idx1-ubyte"),
}

CACHE_MAGIC = b"DCTC"
CACHE_VERSION = 1
_CACHE_HEADER = struct.Struct("<4sIBfII")
_DOMAIN_CODES = {"pixel": 0, "dct": 1}

# Offsets (row, col) of the 30x30 interior inside the shifted 32x32 grid.
SHIFT_OFFSETS = ((0, 0), (0, 1), (0, 2), (1, 0), (1, 2), (2, 0), (2, 1), (2, 2))


class FormatError(ValueError):
    """Malformed IDX stream or dataset cache."""


def _read_header(data: bytes, magic: int, fields: int, what: str):
    size = 4 * (fields + 1)
    if len(data) >= 4:
        (found,) = struct.unpack(">I", data[:4])
        if found != magic:
            raise FormatError(f"{what}: bad magic 0x{found:08x}, expected 0x{magic:08x}")
    if len(data) < size:
        raise FormatError(f"{what}: header needs {size} bytes, got {len(data)}")
    return struct.unpack(f">{fields}I", data[4:size]), size


def parse_idx_images(data: bytes) -> np.ndarray:
    """Decode an IDX3 image stream into a (count, rows, cols) uint8 array."""
    (count, rows, cols), offset = _read_header(data, IMAGES_MAGIC, 3, "idx images")
    expected = offset + count * rows * cols
    if len(data) < expected:
        raise FormatError(f"idx images: truncated stream, expected {expected} bytes, got {len(data)}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=count * rows * cols, offset=offset)
    return pixels.reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes) -> np.ndarray:
    (count,), offset = _read_header(data, LABELS_MAGIC, 1, "idx labels")
    expected = offset + count
    if len(data) < expected:
        raise FormatError(f"idx labels: truncated stream, expected {expected} bytes, got {len(data)}")
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=offset).copy()
    if count and labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise FormatError(f"idx labels: label {labels[bad]} at index {bad} exceeds 9")
    return labels


@dataclass
class RawMnist:
    images: np.ndarray  # (count, 28, 28) uint8
    labels: np.ndarray  # (count,) uint8

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise FormatError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)


def resolve_mnist_dir(mnist_dir=None) -> Path:
    if mnist_dir is None:
        mnist_dir = os.environ.get("MNIST_DIR")
    if mnist_dir is None:
        raise FileNotFoundError("no MNIST directory given and MNIST_DIR is not set")
    return Path(mnist_dir)


def load_mnist(mnist_dir, split: Literal["train", "test"]) -> RawMnist:
    root = resolve_mnist_dir(mnist_dir)
    image_name, label_name = MNIST_FILES[split]
    images = parse_idx_images((root / image_name).read_bytes())
    labels = parse_idx_labels((root / label_name).read_bytes())
    return RawMnist(images, labels)


def lanczos_kernel(x, a: int = 3):
    x = np.asarray(x, dtype=np.float64)
    out = np.sinc(x) * np.sinc(x / a)
    out[np.abs(x) >= a] = 0.0
    return out


def lanczos_weights(in_size: int, out_size: int, a: int = 3) -> np.ndarray:
    """(out_size, in_size) resampling matrix with per-row normalised taps.

    Output pixel centres map to input coordinate ``(i + 0.5) * scale``; when
    shrinking, the kernel is stretched by ``scale`` to stay anti-aliased.
    Taps falling outside the image are dropped and the rest renormalised.
    """
    scale = in_size / out_size
    support = max(scale, 1.0)
    weights = np.zeros((out_size, in_size))
    src = np.arange(in_size) + 0.5
    for i in range(out_size):
        centre = (i + 0.5) * scale
        taps = lanczos_kernel((src - centre) / support, a)
        weights[i] = taps / taps.sum()
    return weights


_RESIZE_28 = lanczos_weights(28, PATCH_SIZE)


def resize_28_to_32(image) -> np.ndarray:
    """Lanczos-3 upsample of a 28x28 byte image to a 32x32 patch in [0, 1]."""
    image = np.asarray(image, dtype=np.float64)
    if image.shape != (28, 28):
        raise ValueError(f"expected a 28x28 image, got {image.shape}")
    return np.clip(_RESIZE_28 @ image @ _RESIZE_28.T / 255.0, 0.0, 1.0)


def resize_batch(images) -> np.ndarray:
    images = np.asarray(images, dtype=np.float64)
    return np.clip(np.matmul(np.matmul(_RESIZE_28, images), _RESIZE_28.T) / 255.0, 0.0, 1.0)


@dataclass
class Dataset:
    """Preprocessed samples sharing one 32x32 domain.

    ``inputs`` is a (count, n, n) float32 stack; one-hot ``targets`` are
    derived from ``labels`` on demand.
    """

    inputs: np.ndarray
    labels: np.ndarray
    domain: Literal["pixel", "dct"]
    threshold: float = 0.0

    def __post_init__(self):
        self.inputs = np.ascontiguousarray(self.inputs, dtype=np.float32)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.uint8)
        # stored as f32 in caches; keep the in-memory value identical
        self.threshold = float(np.float32(self.threshold))
        if self.domain not in _DOMAIN_CODES:
            raise ValueError(f"unknown domain {self.domain!r}")
        if self.inputs.ndim != 3 or self.inputs.shape[1] != self.inputs.shape[2]:
            raise ValueError(f"inputs must be (count, n, n), got {self.inputs.shape}")
        if len(self.inputs) != len(self.labels):
            raise ValueError(f"{len(self.inputs)} inputs but {len(self.labels)} labels")

    def __len__(self):
        return len(self.labels)

    @property
    def n(self) -> int:
        return self.inputs.shape[1]

    @property
    def targets(self) -> np.ndarray:
        return one_hot(self.labels)

    def subset(self, index) -> "Dataset":
        return Dataset(self.inputs[index], self.labels[index], self.domain, self.threshold)


def one_hot(labels, classes: int = 10) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.intp)
    out = np.zeros((len(labels), classes), dtype=np.float32)
    out[np.arange(len(labels)), labels] = 1.0
    return out


def make_pixel_dataset(raw: RawMnist) -> Dataset:
    return Dataset(resize_batch(raw.images), raw.labels, "pixel", 0.0)


def to_dct(patches, tau: float) -> np.ndarray:
    """Forward DCT of a (count, 32, 32) stack followed by thresholding at ``tau``."""
    if tau < 0:
        raise ValueError(f"threshold must be non-negative, got {tau}")
    coeffs = forward_dct_batch(patches, build_dct_matrix(np.shape(patches)[-1]))
    coeffs[np.abs(coeffs) < tau] = 0.0
    return coeffs


def make_dct_dataset(raw: RawMnist, tau: float = DEFAULT_TAU) -> Dataset:
    return Dataset(to_dct(resize_batch(raw.images), tau), raw.labels, "dct", tau)


def pixel_to_dct_dataset(pixels: Dataset, tau: float = DEFAULT_TAU) -> Dataset:
    if pixels.domain != "pixel":
        raise ValueError("source dataset must be in the pixel domain")
    return Dataset(to_dct(pixels.inputs, tau), pixels.labels, "dct", tau)


def shift_augment(patch, direction: int) -> np.ndarray:
    """Move the 30x30 interior of a 32x32 patch by one pixel.

    ``direction`` 0..7 picks the interior's new top-left corner from
    ``SHIFT_OFFSETS``; everything outside the moved block is zero.  Works on
    a single patch or any stack whose last two axes are 32x32.
    """
    if not 0 <= direction <= 7:
        raise ValueError(f"shift direction must be in 0..7, got {direction}")
    patch = np.asarray(patch)
    if patch.shape[-2:] != (PATCH_SIZE, PATCH_SIZE):
        raise ValueError(f"expected 32x32 patch, got {patch.shape[-2:]}")
    r, c = SHIFT_OFFSETS[direction]
    out = np.zeros_like(patch)
    out[..., r:r + 30, c:c + 30] = patch[..., 1:31, 1:31]
    return out


def zeroed_fraction(ds: Dataset) -> float:
    return float(np.mean(ds.inputs == 0))


def dumps_cache(ds: Dataset) -> bytes:
    buf = io.BytesIO()
    buf.write(_CACHE_HEADER.pack(CACHE_MAGIC, CACHE_VERSION, _DOMAIN_CODES[ds.domain],
                                 ds.threshold, len(ds), ds.n))
    buf.write(ds.inputs.astype("<f4").tobytes())
    buf.write(ds.labels.tobytes())
    return buf.getvalue()


def loads_cache(data: bytes) -> Dataset:
    if len(data) < _CACHE_HEADER.size:
        raise FormatError(f"cache: header needs {_CACHE_HEADER.size} bytes, got {len(data)}")
    magic, version, code, threshold, count, n = _CACHE_HEADER.unpack_from(data)
    if magic != CACHE_MAGIC:
        raise FormatError(f"cache: bad magic {magic!r}")
    if version != CACHE_VERSION:
        raise FormatError(f"cache: unsupported version {version}")
    domains = {v: k for k, v in _DOMAIN_CODES.items()}
    if code not in domains:
        raise FormatError(f"cache: unknown domain tag {code}")
    expected = _CACHE_HEADER.size + count * n * n * 4 + count
    if len(data) != expected:
        raise FormatError(f"cache: expected {expected} bytes, got {len(data)}")
    offset = _CACHE_HEADER.size
    inputs = np.frombuffer(data, dtype="<f4", count=count * n * n, offset=offset)
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=offset + count * n * n * 4)
    if count and labels.max() > 9:
        raise FormatError("cache: label exceeds 9")
    return Dataset(inputs.reshape(count, n, n).astype(np.float32), labels.copy(),
                   domains[code], float(threshold))


def save_cache(ds: Dataset, path) -> None:
    Path(path).write_bytes(dumps_cache(ds))


def load_cache(path) -> Dataset:
    return loads_cache(Path(path).read_bytes())
