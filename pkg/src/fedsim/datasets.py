"""Image-classification data handling: IDX binary ingestion, feature
preparation, worker partitioning, and a deterministic synthetic generator
with the same file layout for environments without the real corpus.

All files follow the IDX convention: a big-endian magic number
(0x00000803 for uint8 image tensors, 0x00000801 for uint8 label vectors),
big-endian uint32 dimensions, then raw bytes.  Files may be stored plain or
gzip-compressed with a ``.gz`` suffix.
"""
from __future__ import annotations

import gzip
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

__all__ = [
    "LabeledDataset",
    "read_idx",
    "write_idx",
    "load_split",
    "build_features",
    "load_dataset",
    "partition_iid",
    "partition_by_label",
    "generate_synthetic",
    "resolve_data_dir",
]

DATA_DIR_ENV = "FEDSIM_DATA_DIR"

_IMAGE_MAGIC = 0x00000803
_LABEL_MAGIC = 0x00000801

_SPLIT_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass(frozen=True)
class LabeledDataset:
    """Feature matrix (last column is the constant bias term) with integer
    labels."""

    features: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.labels.ndim != 1:
            raise ValueError("features must be 2-D and labels 1-D")
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("feature and label counts differ")

    def __len__(self) -> int:
        return self.features.shape[0]

    def subset(self, indices) -> "LabeledDataset":
        return LabeledDataset(self.features[indices], self.labels[indices])


def _open_maybe_gzip(path: Path):
    if path.suffix == ".gz":
        return gzip.open(path, "rb")
    return open(path, "rb")


def read_idx(path) -> np.ndarray:
    """Read one uint8 IDX file into an array of the encoded shape."""
    path = Path(path)
    with _open_maybe_gzip(path) as fh:
        header = fh.read(4)
        if len(header) != 4:
            raise ValueError(f"{path}: truncated IDX header")
        magic = int.from_bytes(header, "big")
        if magic not in (_IMAGE_MAGIC, _LABEL_MAGIC):
            raise ValueError(f"{path}: unsupported IDX magic 0x{magic:08x}")
        ndim = magic & 0xFF
        raw_dims = fh.read(4 * ndim)
        if len(raw_dims) != 4 * ndim:
            raise ValueError(f"{path}: truncated IDX dimension header")
        dims = [
            int.from_bytes(raw_dims[4 * i : 4 * i + 4], "big") for i in range(ndim)
        ]
        count = int(np.prod(dims))
        payload = fh.read(count + 1)
        if len(payload) != count:
            raise ValueError(
                f"{path}: payload size mismatch (expected {count} bytes)"
            )
    return np.frombuffer(payload, dtype=np.uint8).reshape(dims)


def write_idx(path, array) -> None:
    """Write a uint8 array (1-D labels or 3-D images) as an IDX file."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    if array.ndim == 1:
        magic = _LABEL_MAGIC
    elif array.ndim == 3:
        magic = _IMAGE_MAGIC
    else:
        raise ValueError("only 1-D label and 3-D image arrays are supported")
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(magic.to_bytes(4, "big"))
        for dim in array.shape:
            fh.write(int(dim).to_bytes(4, "big"))
        fh.write(array.tobytes())


def _find_split_file(data_dir: Path, base: str) -> Path:
    for candidate in (data_dir / base, data_dir / (base + ".gz")):
        if candidate.exists():
            return candidate
    raise FileNotFoundError(f"missing {base}[.gz] under {data_dir}")


def load_split(data_dir, split: str) -> tuple[np.ndarray, np.ndarray]:
    """Load the raw (images, labels) pair for ``split`` in {train, test}."""
    if split not in _SPLIT_FILES:
        raise ValueError(f"split must be 'train' or 'test', got {split!r}")
    data_dir = Path(data_dir)
    image_base, label_base = _SPLIT_FILES[split]
    images = read_idx(_find_split_file(data_dir, image_base))
    labels = read_idx(_find_split_file(data_dir, label_base))
    if images.ndim != 3:
        raise ValueError(f"{image_base}: expected a 3-D image tensor")
    if labels.ndim != 1:
        raise ValueError(f"{label_base}: expected a 1-D label vector")
    if images.shape[0] != labels.shape[0]:
        raise ValueError(
            f"{split}: image count {images.shape[0]} != label count {labels.shape[0]}"
        )
    return images, labels


def build_features(
    images: np.ndarray, feature_scale: float = 1.0, dtype=np.float32
) -> np.ndarray:
    """Flatten images, map bytes to [0, 1], multiply by ``feature_scale``,
    and append a constant-1 bias column."""
    if images.ndim != 3:
        raise ValueError("images must be 3-D (count x rows x cols)")
    if feature_scale <= 0.0:
        raise ValueError(f"feature_scale must be positive, got {feature_scale}")
    n = images.shape[0]
    flat = images.reshape(n, -1).astype(dtype)
    flat *= dtype(feature_scale / 255.0)
    out = np.empty((n, flat.shape[1] + 1), dtype=dtype)
    out[:, :-1] = flat
    out[:, -1] = 1.0
    return out


def load_dataset(
    data_dir, split: str, feature_scale: float = 1.0, dtype=np.float32
) -> LabeledDataset:
    """Load a split and turn it into model-ready features and labels."""
    images, labels = load_split(data_dir, split)
    return LabeledDataset(
        build_features(images, feature_scale, dtype), labels.astype(np.int64)
    )


def partition_iid(
    labels: np.ndarray,
    num_workers: int,
    samples_per_worker: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Disjoint uniform shards: one global draw without replacement, split
    evenly across workers."""
    n = labels.shape[0]
    need = num_workers * samples_per_worker
    if need > n:
        raise ValueError(f"need {need} samples but only {n} available")
    chosen = rng.choice(n, size=need, replace=False)
    return [
        np.sort(chosen[m * samples_per_worker : (m + 1) * samples_per_worker])
        for m in range(num_workers)
    ]


def partition_by_label(
    labels: np.ndarray,
    num_workers: int,
    samples_per_worker: int,
    rng: np.random.Generator,
) -> list[np.ndarray]:
    """Label-skew shards: worker m receives samples drawn only from label m.

    Requires exactly one class per worker (num_workers equal to the number
    of distinct label values covered, i.e. label range 0..num_workers-1).
    """
    shards = []
    for m in range(num_workers):
        pool = np.flatnonzero(labels == m)
        if pool.size < samples_per_worker:
            raise ValueError(
                f"label {m} has {pool.size} samples, need {samples_per_worker}"
            )
        picked = rng.choice(pool, size=samples_per_worker, replace=False)
        shards.append(np.sort(picked))
    return shards


def resolve_data_dir(configured: str | None = None) -> Path:
    """Pick the dataset directory: explicit config value first, then the
    FEDSIM_DATA_DIR environment variable."""
    if configured:
        return Path(configured)
    env = os.environ.get(DATA_DIR_ENV)
    if env:
        return Path(env)
    raise ValueError(
        f"no dataset location: set the data.dir config key or {DATA_DIR_ENV}"
    )


def generate_synthetic(
    data_dir,
    train_count: int = 60_000,
    test_count: int = 10_000,
    seed: int = 2026,
    image_size: int = 28,
    num_classes: int = 10,
    label_noise: float = 0.1,
) -> None:
    """Write a deterministic synthetic corpus in the exact IDX layout of the
    real files.

    Each class is a Gaussian intensity blob at a distinct position on a ring,
    with per-sample center jitter, amplitude variation, and background noise;
    classes are linearly separable enough for softmax regression while still
    overlapping for neighboring ring positions.  A ``label_noise`` fraction
    of the train labels is resampled uniformly (test labels stay clean), so
    the train split is not perfectly separable and gradients stay bounded
    away from zero late in training, as with real handwriting.
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng([int(seed), 0x1DC])

    yy, xx = np.mgrid[0:image_size, 0:image_size].astype(np.float64)
    center = (image_size - 1) / 2.0
    ring = image_size * 0.29
    sigma = image_size / 11.0

    def render(labels: np.ndarray) -> np.ndarray:
        n = labels.shape[0]
        angles = 2.0 * np.pi * labels / num_classes
        cx = center + ring * np.cos(angles) + rng.uniform(-1.5, 1.5, n)
        cy = center + ring * np.sin(angles) + rng.uniform(-1.5, 1.5, n)
        amp = 235.0 * rng.uniform(0.7, 1.1, n)
        dist2 = (xx[None] - cx[:, None, None]) ** 2 + (yy[None] - cy[:, None, None]) ** 2
        img = amp[:, None, None] * np.exp(-dist2 / (2.0 * sigma**2))
        img += rng.normal(0.0, 14.0, img.shape)
        return np.clip(img, 0.0, 255.0).astype(np.uint8)

    batch = 5000
    for split, count, noise in (
        ("train", train_count, float(label_noise)),
        ("test", test_count, 0.0),
    ):
        true = rng.integers(0, num_classes, count)
        images = np.empty((count, image_size, image_size), dtype=np.uint8)
        for start in range(0, count, batch):
            stop = min(start + batch, count)
            images[start:stop] = render(true[start:stop])
        labels = true.copy()
        if noise > 0.0:
            mask = rng.random(count) < noise
            labels[mask] = rng.integers(0, num_classes, int(mask.sum()))
        image_base, label_base = _SPLIT_FILES[split]
        write_idx(data_dir / image_base, images)
        write_idx(data_dir / label_base, labels.astype(np.uint8))
