import gzip
import struct

import numpy as np
import pytest
from scipy import stats

from advworkbench import data
from advworkbench.data import (
    BadMagicError, CountMismatchError, Dataset, TruncatedPayloadError, load_idx, load_mnist, sample_targets,
    subsample,
)

MNIST_DIR = __import__("os").path.join(__import__("os").path.dirname(__file__), "..", "data", "mnist")


def idx_images(pixels):
    pixels = np.asarray(pixels, dtype=np.uint8)
    return struct.pack(">I", 0x803) + struct.pack(">3I", *pixels.shape) + pixels.tobytes()


def idx_labels(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">I", 0x801) + struct.pack(">I", len(labels)) + labels.tobytes()


@pytest.fixture
def fixture_pair(tmp_path):
    pixels = np.arange(2 * 3 * 4, dtype=np.uint8).reshape(2, 3, 4) * 10
    (tmp_path / "img").write_bytes(idx_images(pixels))
    (tmp_path / "lab").write_bytes(idx_labels([7, 2]))
    return tmp_path, pixels


def test_two_image_fixture_exact(fixture_pair):
    path, pixels = fixture_pair
    ds = load_idx(path / "img", path / "lab")
    assert ds.images.shape == (2, 3, 4, 1)
    np.testing.assert_array_equal(ds.images[..., 0], pixels / 255.0)
    np.testing.assert_array_equal(ds.labels, [7, 2])
    assert len(ds.fingerprint) == 64


def test_gzip_fixture_same_content(fixture_pair, tmp_path):
    path, _ = fixture_pair
    (tmp_path / "img.gz").write_bytes(gzip.compress((path / "img").read_bytes()))
    plain = load_idx(path / "img", path / "lab")
    zipped = load_idx(tmp_path / "img.gz", path / "lab")
    np.testing.assert_array_equal(plain.images, zipped.images)


def test_four_dim_rgb_images(tmp_path):
    pixels = np.random.default_rng(0).integers(0, 256, (2, 4, 4, 3), dtype=np.uint8)
    blob = struct.pack(">I", 0x804) + struct.pack(">4I", *pixels.shape) + pixels.tobytes()
    (tmp_path / "img").write_bytes(blob)
    (tmp_path / "lab").write_bytes(idx_labels([0, 1]))
    ds = load_idx(tmp_path / "img", tmp_path / "lab")
    assert ds.input_shape == (4, 4, 3)


def test_count_mismatch(fixture_pair):
    path, _ = fixture_pair
    (path / "lab3").write_bytes(idx_labels([1, 2, 3]))
    with pytest.raises(CountMismatchError):
        load_idx(path / "img", path / "lab3")


def test_bad_magic(fixture_pair):
    path, _ = fixture_pair
    with pytest.raises(BadMagicError, match="bad magic"):
        load_idx(path / "lab", path / "lab")


def test_truncated_payload(fixture_pair):
    path, _ = fixture_pair
    blob = (path / "img").read_bytes()
    (path / "short").write_bytes(blob[:-5])
    with pytest.raises(TruncatedPayloadError):
        load_idx(path / "short", path / "lab")
    (path / "tiny").write_bytes(blob[:6])
    with pytest.raises(TruncatedPayloadError):
        load_idx(path / "tiny", path / "lab")


def test_errors_are_distinct():
    kinds = {BadMagicError, TruncatedPayloadError, CountMismatchError}
    assert len(kinds) == 3 and all(issubclass(k, data.IDXError) for k in kinds)


def test_dataset_validation():
    with pytest.raises(ValueError, match="labels"):
        Dataset(np.zeros((1, 2, 2, 1)), np.array([10]))
    with pytest.raises(ValueError, match="empty"):
        Dataset(np.zeros((0, 2, 2, 1)), np.zeros(0, dtype=int))


def test_official_mnist_test_split():
    ds = load_mnist(MNIST_DIR, "test")
    assert len(ds) == 10000 and ds.input_shape == (28, 28, 1)
    assert ds.images.min() == 0.0 and ds.images.max() == 1.0


def toy(n=300, classes=10, seed=0):
    rng = np.random.default_rng(seed)
    return Dataset(rng.random((n, 2, 2, 1)), np.arange(n) % classes, n_classes=classes, fingerprint="toy")


def test_subsample_identity_when_full():
    ds = toy()
    sub = subsample(ds, len(ds), seed=3)
    np.testing.assert_array_equal(sub.images, ds.images)
    np.testing.assert_array_equal(sub.labels, ds.labels)


def test_subsample_deterministic():
    ds = toy()
    a, b = subsample(ds, 50, 1), subsample(ds, 50, 1)
    np.testing.assert_array_equal(a.labels, b.labels)
    assert a.fingerprint == b.fingerprint != subsample(ds, 50, 2).fingerprint


def test_subsample_too_many():
    with pytest.raises(ValueError, match="cannot draw"):
        subsample(toy(), 301, 0)


def test_subsample_warns_on_imbalance():
    ds = Dataset(np.zeros((100, 1, 1, 1)), np.array([0] * 90 + [1] * 10), n_classes=2)
    assert subsample(ds, 100, 0).warnings


def test_mnist_1000_draw_has_all_classes():
    sub = subsample(load_mnist(MNIST_DIR, "test"), 1000, 13)
    assert set(np.unique(sub.labels)) == set(range(10))


def test_targets_binary_is_other_class():
    labels = np.array([0, 1, 1, 0])
    np.testing.assert_array_equal(sample_targets(labels, 2, 0), [1, 0, 0, 1])


def test_targets_never_equal_label():
    labels = np.random.default_rng(0).integers(0, 10, 10000)
    assert not np.any(sample_targets(labels, 10, 5) == labels)


def test_targets_uniform_over_other_classes():
    labels = np.random.default_rng(0).integers(0, 10, 10000)
    offsets = (sample_targets(labels, 10, 5) - labels) % 10
    counts = np.bincount(offsets, minlength=10)[1:]
    assert stats.chisquare(counts).pvalue > 0.01


def test_targets_need_two_classes():
    with pytest.raises(ValueError):
        sample_targets(np.zeros(3, dtype=int), 1, 0)
