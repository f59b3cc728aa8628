"""Datasets: the synthetic peaks benchmark, IDX and CIFAR-10 binary loaders,
seeded splits, and deterministic per-epoch batching.

Loaders are total: a byte stream either yields a valid dataset or raises
:class:`DataFormatError`; there is no silently truncated output. Images are
scaled to [0, 1]. Network fetching is out of scope; file paths come from the
caller.
"""

import gzip
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataFormatError, ShapeError
from .rng import substream

PEAKS_THRESHOLDS = (-3.0, -1.0, 1.0, 3.0)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD_BYTES = 3073


def one_hot(indices: np.ndarray, n_classes: int) -> np.ndarray:
    indices = np.asarray(indices, dtype=np.int64)
    out = np.zeros((indices.shape[0], n_classes))
    out[np.arange(indices.shape[0]), indices] = 1.0
    return out


@dataclass
class Dataset:
    inputs: np.ndarray
    labels: np.ndarray
    n_classes: int
    split: str = "train"

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.float64)
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError(
                f"{self.inputs.shape[0]} inputs vs {self.labels.shape[0]} labels"
            )
        if self.labels.shape[1:] != (self.n_classes,):
            raise ShapeError(f"labels shape {self.labels.shape} for {self.n_classes} classes")
        if not np.isfinite(self.inputs).all():
            raise ShapeError("inputs contain non-finite values")
        if self.labels.size and not (
            np.isin(self.labels, (0.0, 1.0)).all()
            and np.array_equal(self.labels.sum(axis=1), np.ones(len(self)))
        ):
            raise ShapeError("labels must be one-hot rows")

    def __len__(self) -> int:
        return self.inputs.shape[0]

    def class_indices(self) -> np.ndarray:
        return np.argmax(self.labels, axis=1)

    def subset(self, idx: np.ndarray, split: str | None = None) -> "Dataset":
        return Dataset(self.inputs[idx], self.labels[idx], self.n_classes,
                       split if split is not None else self.split)


@dataclass
class Batch:
    inputs: np.ndarray
    labels: np.ndarray


@dataclass(frozen=True)
class BatchPlan:
    batch_size: int
    seed: int
    epochs: int

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ValueError(f"epochs must be >= 0, got {self.epochs}")


def peaks_surface(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """The classical two-dimensional peaks surface."""
    return (
        3.0 * (1.0 - x) ** 2 * np.exp(-(x**2) - (y + 1.0) ** 2)
        - 10.0 * (x / 5.0 - x**3 - y**5) * np.exp(-(x**2) - y**2)
        - (1.0 / 3.0) * np.exp(-((x + 1.0) ** 2) - y**2)
    )


def generate_peaks(n: int, seed: int, thresholds=PEAKS_THRESHOLDS,
                   split: str = "train") -> Dataset:
    """Sample ``n`` uniform points in the unit square and label them by
    thresholding the peaks surface evaluated on [-3, 3]^2.

    Inputs are the raw unit-square coordinates; the surface is evaluated at
    ``(6u - 3, 6v - 3)``. Thresholds partition the height into
    ``len(thresholds) + 1`` classes.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = substream(seed, "peaks")
    uv = rng.uniform(0.0, 1.0, size=(n, 2))
    z = peaks_surface(6.0 * uv[:, 0] - 3.0, 6.0 * uv[:, 1] - 3.0)
    classes = np.searchsorted(np.asarray(thresholds, dtype=np.float64), z)
    return Dataset(uv, one_hot(classes, len(thresholds) + 1), len(thresholds) + 1, split)


def _read_maybe_gzip(path) -> bytes:
    raw = Path(path).read_bytes()
    if raw[:2] == b"\x1f\x8b":
        try:
            return gzip.decompress(raw)
        except OSError as e:
            raise DataFormatError(f"{path}: bad gzip stream ({e})") from e
    return raw


def _idx_array(path, expected_magic: int) -> np.ndarray:
    buf = _read_maybe_gzip(path)
    if len(buf) < 4:
        raise DataFormatError(f"{path}: truncated header at byte {len(buf)}")
    magic = int.from_bytes(buf[0:4], "big")
    if magic != expected_magic:
        raise DataFormatError(
            f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{expected_magic:08x}"
        )
    ndim = magic & 0xFF
    header_len = 4 + 4 * ndim
    if len(buf) < header_len:
        raise DataFormatError(f"{path}: truncated dimension header at byte {len(buf)}")
    dims = [int.from_bytes(buf[4 + 4 * i : 8 + 4 * i], "big") for i in range(ndim)]
    expected = header_len + int(np.prod(dims))
    if len(buf) != expected:
        raise DataFormatError(
            f"{path}: expected {expected} bytes for dims {dims}, "
            f"stream ends at byte {len(buf)}"
        )
    return np.frombuffer(buf, dtype=np.uint8, offset=header_len).reshape(dims)


def load_idx(images_path, labels_path, flatten: bool = True,
             split: str = "train") -> Dataset:
    """Load an IDX image/label pair (big-endian, optionally gzipped).

    Pixels are scaled to [0, 1]; images come back flat ``(n, rows*cols)`` or
    as ``(n, rows, cols, 1)`` when ``flatten=False``. Labels are one-hot
    over 10 classes.
    """
    images = _idx_array(images_path, IDX_IMAGES_MAGIC)
    labels = _idx_array(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataFormatError(
            f"count mismatch: {images.shape[0]} images vs {labels.shape[0]} labels"
        )
    if labels.max(initial=0) > 9:
        raise DataFormatError(f"label {labels.max()} outside 0-9")
    x = images.astype(np.float64) / 255.0
    n, rows, cols = x.shape
    x = x.reshape(n, rows * cols) if flatten else x.reshape(n, rows, cols, 1)
    return Dataset(x, one_hot(labels, 10), 10, split)


def load_cifar10(batch_files, split: str = "train") -> Dataset:
    """Load CIFAR-10 binary batch files (label byte + CHW pixel planes per
    3073-byte record) into HWC images in [0, 1]."""
    images = []
    labels = []
    for path in batch_files:
        buf = Path(path).read_bytes()
        if len(buf) == 0 or len(buf) % CIFAR_RECORD_BYTES != 0:
            raise DataFormatError(
                f"{path}: size {len(buf)} is not a whole number of "
                f"{CIFAR_RECORD_BYTES}-byte records (misaligned at byte "
                f"{len(buf) - len(buf) % CIFAR_RECORD_BYTES})"
            )
        rec = np.frombuffer(buf, dtype=np.uint8).reshape(-1, CIFAR_RECORD_BYTES)
        lab = rec[:, 0]
        bad = np.nonzero(lab > 9)[0]
        if bad.size:
            raise DataFormatError(
                f"{path}: label byte {int(lab[bad[0]])} at record {int(bad[0])} "
                "outside valid range 0-9"
            )
        images.append(
            rec[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1).astype(np.float64)
            / 255.0
        )
        labels.append(lab)
    if not images:
        raise DataFormatError("no CIFAR batch files given")
    return Dataset(
        np.concatenate(images), one_hot(np.concatenate(labels), 10), 10, split
    )


def split(d: Dataset, sizes: tuple[int, int, int], seed: int) -> tuple[Dataset, Dataset, Dataset]:
    """Seeded shuffle followed by contiguous train/val/test slicing."""
    n_train, n_val, n_test = sizes
    if min(sizes) < 0:
        raise ValueError(f"split sizes must be non-negative, got {sizes}")
    if n_train + n_val + n_test > len(d):
        raise ValueError(f"split sizes {sizes} exceed dataset size {len(d)}")
    perm = substream(seed, "split").permutation(len(d))
    a, b = n_train, n_train + n_val
    return (
        d.subset(perm[:a], "train"),
        d.subset(perm[a:b], "val"),
        d.subset(perm[b : b + n_test], "test"),
    )


def batch_indices(n: int, plan: BatchPlan, epoch: int) -> list[np.ndarray]:
    """Disjoint index chunks covering ``range(n)``, reshuffled per epoch."""
    perm = substream(plan.seed, "batches", epoch).permutation(n)
    return [perm[i : i + plan.batch_size] for i in range(0, n, plan.batch_size)]


def batches(d: Dataset, plan: BatchPlan, epoch: int) -> list[Batch]:
    """Ordered batches for one epoch; the last short batch is kept."""
    return [
        Batch(d.inputs[idx], d.labels[idx]) for idx in batch_indices(len(d), plan, epoch)
    ]
