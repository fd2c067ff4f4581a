"""IDX dataset loading, seeded subsampling and target-class sampling."""

import gzip
import hashlib
import os
import struct
from dataclasses import dataclass, field, replace

import numpy as np

IMAGES_MAGIC_3D = 0x00000803
IMAGES_MAGIC_4D = 0x00000804
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IDXError(ValueError):
    pass


class BadMagicError(IDXError):
    pass


class TruncatedPayloadError(IDXError):
    pass


class CountMismatchError(IDXError):
    pass


@dataclass(eq=False)
class Dataset:
    images: np.ndarray  # (N, H, W, C) float64 in [0, 1]
    labels: np.ndarray  # (N,) int64
    split: str = "test"
    fingerprint: str = ""
    n_classes: int = 10
    warnings: list = field(default_factory=list)

    def __post_init__(self):
        if self.images.ndim != 4:
            raise ValueError(f"images must be (N, H, W, C), got {self.images.shape}")
        if len(self.images) == 0:
            raise ValueError("dataset is empty")
        if len(self.images) != len(self.labels):
            raise CountMismatchError(f"{len(self.images)} images but {len(self.labels)} labels")
        if np.any(self.labels < 0) or np.any(self.labels >= self.n_classes):
            raise ValueError(f"labels must lie in [0, {self.n_classes})")

    def __len__(self):
        return len(self.labels)

    @property
    def input_shape(self):
        return tuple(self.images.shape[1:])


def _read(path):
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:2] == b"\x1f\x8b":
        raw = gzip.decompress(raw)
    return raw


def _parse(raw, expected_magics, path):
    if len(raw) < 4:
        raise TruncatedPayloadError(f"{path}: file too short for an IDX header")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic not in expected_magics:
        raise BadMagicError(f"{path}: bad magic 0x{magic:08x}, expected one of "
                            + ", ".join(f"0x{m:08x}" for m in expected_magics))
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedPayloadError(f"{path}: truncated header")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    count = int(np.prod(dims))
    if len(raw) - header < count:
        raise TruncatedPayloadError(f"{path}: payload has {len(raw) - header} bytes, header says {count}")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=header).reshape(dims)


def load_idx(images_path, labels_path, split="test", n_classes=10):
    """Read an IDX image/label pair (optionally gzip-compressed).

    Pixels are scaled by 1/255 into [0, 1]; 3-d image files get a trailing
    channel axis of size 1.
    """
    raw_images = _read(images_path)
    raw_labels = _read(labels_path)
    images = _parse(raw_images, (IMAGES_MAGIC_3D, IMAGES_MAGIC_4D), images_path)
    labels = _parse(raw_labels, (LABELS_MAGIC,), labels_path)
    if images.shape[0] != labels.shape[0]:
        raise CountMismatchError(f"{images_path} has {images.shape[0]} images but "
                                 f"{labels_path} has {labels.shape[0]} labels")
    if images.ndim == 3:
        images = images[..., None]
    digest = hashlib.sha256()
    digest.update(hashlib.sha256(raw_images).digest())
    digest.update(hashlib.sha256(raw_labels).digest())
    return Dataset(images.astype(np.float64) / 255.0, labels.astype(np.int64), split,
                   digest.hexdigest(), n_classes)


def _find(directory, stem):
    for name in (stem, stem + ".gz"):
        path = os.path.join(directory, name)
        if os.path.exists(path):
            return path
    raise FileNotFoundError(f"neither {stem} nor {stem}.gz found in {directory}")


def load_mnist(directory, split):
    """Load the standard MNIST file pair for ``split`` ("train" or "test") from ``directory``."""
    img, lab = MNIST_FILES[split]
    return load_idx(_find(directory, img), _find(directory, lab), split=split)


def subset(dataset, indices):
    indices = np.asarray(indices)
    return replace(dataset, images=dataset.images[indices], labels=dataset.labels[indices],
                   warnings=list(dataset.warnings))


def subsample(dataset, n, seed):
    """Seeded draw of ``n`` examples without replacement (kept in original order).

    A warning is attached when some class count falls outside +-20% of uniform.
    """
    N = len(dataset)
    if n > N:
        raise ValueError(f"cannot draw {n} examples from a dataset of {N}")
    if n < 1:
        raise ValueError("n must be positive")
    idx = np.sort(np.random.default_rng(seed).choice(N, size=n, replace=False))
    out = subset(dataset, idx)
    out.fingerprint = hashlib.sha256(f"{dataset.fingerprint}:{n}:{seed}".encode()).hexdigest()
    counts = np.bincount(out.labels, minlength=dataset.n_classes)
    expected = n / dataset.n_classes
    if np.any(np.abs(counts - expected) > 0.2 * expected):
        out.warnings.append(f"class counts {counts.tolist()} deviate more than 20% from uniform ({expected:g})")
    return out


def sample_targets(labels, n_classes, seed):
    """Uniform random target class per label, never equal to the label itself."""
    if n_classes < 2:
        raise ValueError("need at least two classes to sample targets")
    labels = np.asarray(labels, dtype=np.int64)
    offsets = np.random.default_rng(seed).integers(1, n_classes, size=labels.shape)
    return (labels + offsets) % n_classes
