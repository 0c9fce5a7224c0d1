"""Dataset loading: a seeded synthetic two-class set plus parsers for the
IDX ubyte and CIFAR-10 binary on-disk formats.

Images are always returned as float64 NHWC arrays scaled to [0, 1] with
integer label vectors.
"""

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DatasetError

DATASETS = ("synthetic", "idx-mnist", "cifar10-binary")


@dataclass
class Dataset:
    name: str
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def n_classes(self):
        return int(max(self.train_y.max(), self.test_y.max())) + 1

    @property
    def input_shape(self):
        return self.train_x.shape[1:]


# ---------------------------------------------------------------------------
# synthetic oriented bars

def synthetic_bars(seed=0, n_train=512, n_test=256, hw=8, noise=0.15):
    """Two-class 8x8x1 patterns: horizontal bars (class 0) vs vertical (1).

    Bar position, intensity, and background noise are drawn from one seeded
    generator, so a fixed seed reproduces the set byte for byte.
    """
    rng = np.random.default_rng(seed)
    total = n_train + n_test
    x = np.empty((total, hw, hw, 1))
    y = np.empty(total, dtype=np.int64)
    for i in range(total):
        label = i % 2
        img = rng.uniform(0.0, noise, size=(hw, hw))
        pos = int(rng.integers(0, hw))
        intensity = float(rng.uniform(0.6, 1.0))
        if label == 0:
            img[pos, :] = intensity
        else:
            img[:, pos] = intensity
        x[i, :, :, 0] = img
        y[i] = label
    order = rng.permutation(total)
    x, y = x[order], y[order]
    return Dataset("synthetic", x[:n_train], y[:n_train], x[n_train:], y[n_train:])


# ---------------------------------------------------------------------------
# IDX ubyte format (big-endian)

def load_idx(path):
    """Parse an IDX ubyte file into a numpy array."""
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: file not found")
    data = path.read_bytes()
    if len(data) < 4:
        raise DatasetError(f"{path}: truncated magic at byte {len(data)}")
    zeros, dtype, ndim = data[0] << 8 | data[1], data[2], data[3]
    if zeros != 0 or dtype != 0x08:
        raise DatasetError(f"{path}: bad IDX magic {data[:4].hex()} at byte 0 "
                           f"(expected 0000 08 nn for ubyte)")
    header_len = 4 + 4 * ndim
    if len(data) < header_len:
        raise DatasetError(f"{path}: truncated dimension header at byte {len(data)}")
    dims = struct.unpack(f">{ndim}I", data[4:header_len])
    count = int(np.prod(dims))
    if len(data) != header_len + count:
        raise DatasetError(f"{path}: payload of {len(data) - header_len} bytes "
                           f"at byte {header_len} does not match dims {dims}")
    return np.frombuffer(data, dtype=np.uint8, offset=header_len).reshape(dims)


def load_idx_mnist(data_dir):
    """Standard MNIST file names: train-images-idx3-ubyte etc."""
    d = Path(data_dir)
    names = ["train-images-idx3-ubyte", "train-labels-idx1-ubyte",
             "t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"]
    train_x, train_y, test_x, test_y = (load_idx(d / n) for n in names)
    return Dataset("idx-mnist",
                   _as_images(train_x, "train images"), _as_labels(train_y),
                   _as_images(test_x, "test images"), _as_labels(test_y))


def _as_images(arr, what):
    if arr.ndim != 3:
        raise DatasetError(f"{what}: expected a 3D ubyte tensor, got {arr.ndim}D")
    return arr.astype(np.float64)[..., None] / 255.0


def _as_labels(arr):
    return arr.astype(np.int64).ravel()


# ---------------------------------------------------------------------------
# CIFAR-10 binary format: 3073-byte records, label + 3072 channel-major pixels

CIFAR_RECORD = 3073
CIFAR_TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
CIFAR_TEST_FILE = "test_batch.bin"


def load_cifar10_file(path):
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"{path}: file not found")
    data = path.read_bytes()
    if len(data) == 0 or len(data) % CIFAR_RECORD != 0:
        raise DatasetError(f"{path}: size {len(data)} is not a multiple of "
                           f"{CIFAR_RECORD}; first partial record at byte "
                           f"{len(data) - len(data) % CIFAR_RECORD}")
    records = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
    labels = records[:, 0].astype(np.int64)
    if labels.max() > 9:
        bad = int(np.argmax(labels > 9))
        raise DatasetError(f"{path}: label {labels[bad]} out of range at byte "
                           f"{bad * CIFAR_RECORD}")
    # channel-major planes: 1024 red, 1024 green, 1024 blue, each 32x32
    pixels = records[:, 1:].reshape(-1, 3, 32, 32).transpose(0, 2, 3, 1)
    return pixels.astype(np.float64) / 255.0, labels


def load_cifar10(data_dir):
    d = Path(data_dir)
    xs, ys = [], []
    for name in CIFAR_TRAIN_FILES:
        if (d / name).exists():
            x, y = load_cifar10_file(d / name)
            xs.append(x)
            ys.append(y)
    if not xs:
        raise DatasetError(f"{d}: no CIFAR-10 training batches "
                           f"({CIFAR_TRAIN_FILES[0]} ...) found")
    test_x, test_y = load_cifar10_file(d / CIFAR_TEST_FILE)
    return Dataset("cifar10-binary", np.concatenate(xs), np.concatenate(ys),
                   test_x, test_y)


# ---------------------------------------------------------------------------

def load_dataset(cfg):
    """Dispatch on cfg.dataset; file-backed sets read from cfg.data_dir.

    For file-backed sets, n_train/n_test trim the split (0 keeps it whole);
    for the synthetic set they are the generated sizes.
    """
    if cfg.dataset == "synthetic":
        return synthetic_bars(seed=cfg.seed, n_train=cfg.n_train, n_test=cfg.n_test)
    if cfg.dataset == "idx-mnist":
        data = load_idx_mnist(cfg.data_dir)
    elif cfg.dataset == "cifar10-binary":
        data = load_cifar10(cfg.data_dir)
    else:
        raise ConfigError(f"unknown dataset {cfg.dataset!r}; choose from {DATASETS}")
    if cfg.n_train and cfg.n_train < len(data.train_y):
        data = Dataset(data.name, data.train_x[:cfg.n_train], data.train_y[:cfg.n_train],
                       data.test_x, data.test_y)
    if cfg.n_test and cfg.n_test < len(data.test_y):
        data = Dataset(data.name, data.train_x, data.train_y,
                       data.test_x[:cfg.n_test], data.test_y[:cfg.n_test])
    return data
