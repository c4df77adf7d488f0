"""Dataset ingestion, normalization, and deterministic mini-batching.

Datasets are stored on disk in their canonical public binary formats
(IDX for MNIST, pickled batches for CIFAR10) and converted to a single
internal layout at load time: float32 arrays of shape (n, c, h, w) with
pixels in [0, 1], plus int64 label vectors.
"""

import gzip
import os
import pickle
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, IngestError, RangeError, UnknownDataset

DATA_ROOT_ENV = "SEMCOM_DATA_ROOT"

DATASET_SHAPES = {
    "mnist": (1, 28, 28),
    "cifar10": (3, 32, 32),
}
NUM_CLASSES = 10

_MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


@dataclass
class LabeledImageSet:
    """A full dataset split in the internal tensor layout."""

    images: np.ndarray  # (n, c, h, w) float32 in [0, 1]
    labels: np.ndarray  # (n,) int64 in [0, NUM_CLASSES-1]
    name: str
    split: str

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise IngestError(
                f"{len(self.images)} images but {len(self.labels)} labels"
            )
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= NUM_CLASSES):
            raise IngestError("labels outside [0, %d]" % (NUM_CLASSES - 1))

    def __len__(self):
        return len(self.images)

    @property
    def image_shape(self):
        return tuple(self.images.shape[1:])


@dataclass
class Batch:
    images: np.ndarray  # (b, c, h, w)
    labels: np.ndarray  # (b,)

    def __len__(self):
        return len(self.images)


def resolve_root(root=None):
    """Dataset root: explicit argument, else $SEMCOM_DATA_ROOT, else ./datasets."""
    if root is not None:
        return root
    return os.environ.get(DATA_ROOT_ENV, "datasets")


def _find_file(dirs, name):
    """Locate `name` or `name`.gz under any of the candidate directories."""
    for d in dirs:
        for candidate in (os.path.join(d, name), os.path.join(d, name + ".gz")):
            if os.path.isfile(candidate):
                return candidate
    return None


def _open_maybe_gzip(path):
    if path.endswith(".gz"):
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_idx_images(path):
    with _open_maybe_gzip(path) as f:
        header = f.read(16)
        if len(header) != 16:
            raise IngestError(f"truncated IDX header in {path}")
        magic, n, rows, cols = struct.unpack(">IIII", header)
        if magic != 2051:
            raise IngestError(f"bad IDX image magic {magic} in {path}")
        buf = f.read(n * rows * cols)
    if len(buf) != n * rows * cols:
        raise IngestError(f"truncated IDX image payload in {path}")
    data = np.frombuffer(buf, dtype=np.uint8).reshape(n, 1, rows, cols)
    return data.astype(np.float32) / 255.0


def _read_idx_labels(path):
    with _open_maybe_gzip(path) as f:
        header = f.read(8)
        if len(header) != 8:
            raise IngestError(f"truncated IDX header in {path}")
        magic, n = struct.unpack(">II", header)
        if magic != 2049:
            raise IngestError(f"bad IDX label magic {magic} in {path}")
        buf = f.read(n)
    if len(buf) != n:
        raise IngestError(f"truncated IDX label payload in {path}")
    return np.frombuffer(buf, dtype=np.uint8).astype(np.int64)


def _load_mnist(split, root):
    dirs = [os.path.join(root, "mnist", split), os.path.join(root, "mnist")]
    image_name, label_name = _MNIST_FILES[split]
    image_path = _find_file(dirs, image_name)
    label_path = _find_file(dirs, label_name)
    if image_path is None or label_path is None:
        raise IngestError(
            f"MNIST {split} IDX files not found under {dirs}; expected "
            f"{image_name}[.gz] and {label_name}[.gz]"
        )
    return _read_idx_images(image_path), _read_idx_labels(label_path)


def _load_cifar_batch(path):
    try:
        with _open_maybe_gzip(path) as f:
            entry = pickle.load(f, encoding="bytes")
        data = entry[b"data"]
        labels = entry[b"labels"]
    except (pickle.UnpicklingError, KeyError, EOFError, OSError) as exc:
        raise IngestError(f"corrupt CIFAR10 batch {path}: {exc}") from exc
    images = np.asarray(data, dtype=np.uint8).reshape(-1, 3, 32, 32)
    return images.astype(np.float32) / 255.0, np.asarray(labels, dtype=np.int64)


def _load_cifar10(split, root):
    dirs = [
        os.path.join(root, "cifar10", split),
        os.path.join(root, "cifar10", "cifar-10-batches-py"),
        os.path.join(root, "cifar10"),
    ]
    names = [f"data_batch_{i}" for i in range(1, 6)] if split == "train" else ["test_batch"]
    paths = [_find_file(dirs, n) for n in names]
    if any(p is None for p in paths):
        raise IngestError(
            f"CIFAR10 {split} batches not found under {dirs}; expected {names}"
        )
    parts = [_load_cifar_batch(p) for p in paths]
    images = np.concatenate([p[0] for p in parts])
    labels = np.concatenate([p[1] for p in parts])
    return images, labels


def load_dataset(name, split, root=None):
    """Load a full dataset split from its canonical on-disk format.

    Raises UnknownDataset for unsupported names and IngestError when
    files are missing or corrupt.
    """
    if name not in DATASET_SHAPES:
        raise UnknownDataset(f"unknown dataset {name!r}; supported: mnist, cifar10")
    if split not in ("train", "test"):
        raise ConfigError(f"unknown split {split!r}; expected train or test")
    root = resolve_root(root)
    if name == "mnist":
        images, labels = _load_mnist(split, root)
    else:
        images, labels = _load_cifar10(split, root)
    if images.shape[1:] != DATASET_SHAPES[name]:
        raise IngestError(
            f"{name} images have shape {images.shape[1:]}, "
            f"expected {DATASET_SHAPES[name]}"
        )
    return LabeledImageSet(images=images, labels=labels, name=name, split=split)


def dataset_available(name, split, root=None):
    """True when the canonical files for (name, split) are present."""
    try:
        loader = _load_mnist if name == "mnist" else _load_cifar10
    except KeyError:
        return False
    root = resolve_root(root)
    try:
        loader(split, root)
    except IngestError:
        return False
    return True


def normalize(image):
    """Map pixels from [0, 1] to [-1, 1] elementwise (2 * x - 1)."""
    arr = np.asarray(image)
    if arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise RangeError("pixels outside [0, 1]")
    return 2.0 * arr - 1.0


def denormalize(image):
    """Inverse of normalize: map [-1, 1] back to [0, 1]."""
    return (np.asarray(image) + 1.0) / 2.0


def batches(dataset, size, seed):
    """Yield one epoch of Batch objects in a seed-determined shuffle order.

    Every sample appears exactly once; the final batch may be smaller.
    """
    if size < 1:
        raise ConfigError(f"batch size must be >= 1, got {size}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    for start in range(0, len(order), size):
        idx = order[start:start + size]
        yield Batch(images=dataset.images[idx], labels=dataset.labels[idx])


def split_dataset(dataset, holdout, seed):
    """Split off a deterministic holdout set (for validation)."""
    if not 0 < holdout < len(dataset):
        raise ConfigError(f"holdout {holdout} outside (0, {len(dataset)})")
    order = np.random.default_rng(seed).permutation(len(dataset))
    val_idx, train_idx = order[:holdout], order[holdout:]
    make = lambda idx, split: LabeledImageSet(
        images=dataset.images[idx], labels=dataset.labels[idx],
        name=dataset.name, split=split,
    )
    return make(train_idx, dataset.split), make(val_idx, "val")
