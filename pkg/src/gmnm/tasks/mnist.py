"""Reader for the IDX containers of the MNIST distribution.

Big-endian header: magic (0x00000803 images with 3 dims, 0x00000801 labels
with 1 dim), then one uint32 per dimension, then unsigned-byte payload.
Gzipped files are read transparently.
"""
from __future__ import annotations

import gzip
import os
import struct
from pathlib import Path

import numpy as np

from .dataset import Dataset

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}


class IdxFormatError(ValueError):
    pass


def _read(path) -> bytes:
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        return fh.read()


def parse_idx(raw: bytes, magic: int, ndim: int) -> np.ndarray:
    if len(raw) < 4 + 4 * ndim:
        raise IdxFormatError("file is shorter than its header")
    (got,) = struct.unpack(">I", raw[:4])
    if got != magic:
        raise IdxFormatError(f"magic {got:#010x}, expected {magic:#010x}")
    dims = struct.unpack(f">{ndim}I", raw[4:4 + 4 * ndim])
    payload = raw[4 + 4 * ndim:]
    need = int(np.prod(dims))
    if len(payload) < need:
        raise IdxFormatError(f"payload truncated: {len(payload)} of {need} bytes")
    return np.frombuffer(payload, dtype=np.uint8, count=need).reshape(dims)


def read_images(path) -> np.ndarray:
    return parse_idx(_read(path), IMAGES_MAGIC, 3)


def read_labels(path) -> np.ndarray:
    return parse_idx(_read(path), LABELS_MAGIC, 1)


def mnist_load(images_path, labels_path, limit: int | None = None) -> Dataset:
    """Images scaled to [0, 1] as [N x 28 x 28 x 1] and integer labels [N].

    Every example lands in the train partition; see :func:`mnist_split` for
    a train/test pair.
    """
    images = read_images(images_path)
    labels = read_labels(labels_path)
    if len(images) != len(labels):
        raise IdxFormatError(f"{len(images)} images but {len(labels)} labels")
    if limit is not None:
        images, labels = images[:limit], labels[:limit]
    X = (images.astype(np.float64) / 255.0)[..., None]
    return Dataset(X, labels.astype(np.int64), np.arange(len(X)), np.arange(0))


def data_root(root=None) -> Path:
    """Explicit ``root``, else ``$GMNM_DATA_DIR``, else ./data."""
    return Path(root if root is not None else os.environ.get("GMNM_DATA_DIR", "data"))


def find_file(root, stem) -> Path:
    """Look for ``stem`` (optionally gzipped) in ``root`` and ``root/mnist``."""
    for folder in (Path(root), Path(root) / "mnist"):
        for name in (stem, stem + ".gz", stem.replace("-idx", ".idx"), stem.replace("-idx", ".idx") + ".gz"):
            p = folder / name
            if p.exists():
                return p
    raise FileNotFoundError(f"no {stem}[.gz] under {root}")


def mnist_split(root, train_limit: int | None = 10000, test_limit: int | None = None) -> Dataset:
    """Training subset plus the test file as one dataset with a fixed split."""
    tr = mnist_load(find_file(root, FILES["train"][0]), find_file(root, FILES["train"][1]), train_limit)
    te = mnist_load(find_file(root, FILES["test"][0]), find_file(root, FILES["test"][1]), test_limit)
    X = np.concatenate([tr.inputs, te.inputs])
    Y = np.concatenate([tr.targets, te.targets])
    n = len(tr.inputs)
    return Dataset(X, Y, np.arange(n), np.arange(n, len(X)))


def write_idx(path, array: np.ndarray) -> None:
    """Write a uint8 array as an IDX file (used for fixtures)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = IMAGES_MAGIC if array.ndim == 3 else LABELS_MAGIC
    with open(path, "wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())
