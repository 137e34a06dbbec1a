"""Image datasets: IDX reading and writing, stratified splits."""
import gzip
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Dict, Mapping, Optional, Tuple

import numpy as np
from sklearn.model_selection import train_test_split

from ..config import LabConfig
from ..errors import DataFormatError, SplitError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801
SPLITS = ('train', 'val', 'test')


@dataclass
class ImageDataset:
    """Grayscale images in [0, 1] with class labels and optional split tags."""

    images: np.ndarray
    labels: np.ndarray
    split: Optional[np.ndarray] = field(default=None)

    def __post_init__(self):
        if self.images.ndim != 3:
            raise DataFormatError(f"Images must be (count, height, width), got shape {self.images.shape}")
        if len(self.images) != len(self.labels):
            raise DataFormatError(f"{len(self.images)} images but {len(self.labels)} labels")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> Tuple[int, int]:
        return int(self.images.shape[1]), int(self.images.shape[2])

    def indices(self, tag: str) -> np.ndarray:
        if self.split is None:
            raise SplitError("Dataset has no split tags")
        return np.nonzero(self.split == tag)[0]

    def part(self, tag: str) -> 'ImageDataset':
        idx = self.indices(tag)
        return ImageDataset(self.images[idx], self.labels[idx])

    def subset(self, idx: np.ndarray) -> 'ImageDataset':
        return ImageDataset(self.images[idx], self.labels[idx], None if self.split is None else self.split[idx])

    def map_images(self, fn) -> 'ImageDataset':
        """Same labels and tags, images transformed by ``fn`` (a batch function)."""
        return ImageDataset(fn(self.images), self.labels, self.split)


def _open(path: str):
    with open(path, 'rb') as fh:
        head = fh.read(2)
    return gzip.open(path, 'rb') if head == b'\x1f\x8b' else open(path, 'rb')


def read_idx(path: str, expected_magic: int) -> np.ndarray:
    """Read an unsigned-byte IDX file (raw or gzip) into an array of its declared shape."""
    try:
        with _open(path) as fh:
            payload = fh.read()
    except OSError as e:
        logger.error(f"Cannot read IDX file {path}: {str(e)}")
        raise DataFormatError(f"Cannot read IDX file {path}: {e}") from e
    if len(payload) < 4:
        raise DataFormatError(f"{path}: truncated header")
    magic = struct.unpack('>I', payload[:4])[0]
    if magic != expected_magic:
        raise DataFormatError(f"{path}: bad magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(payload) < header:
        raise DataFormatError(f"{path}: truncated header")
    dims = struct.unpack(f'>{ndim}I', payload[4:header])
    count = int(np.prod(dims))
    if len(payload) - header < count:
        raise DataFormatError(f"{path}: truncated payload ({len(payload) - header} of {count} bytes)")
    return np.frombuffer(payload, dtype=np.uint8, count=count, offset=header).reshape(dims)


def write_idx(path: str, array: np.ndarray, compress: bool = False) -> None:
    """Write an unsigned-byte array as IDX (magic 0x08 type, ndim in the low byte)."""
    array = np.ascontiguousarray(array, dtype=np.uint8)
    header = struct.pack(f'>I{array.ndim}I', 0x0800 | array.ndim, *array.shape)
    opener = gzip.open if compress else open
    with opener(path, 'wb') as fh:
        fh.write(header + array.tobytes())


def load_mnist(image_path: str, label_path: str) -> ImageDataset:
    """Images scaled to [0, 1] by /255, labels as int64."""
    images = read_idx(image_path, IMAGES_MAGIC)
    labels = read_idx(label_path, LABELS_MAGIC)
    if len(images) != len(labels):
        logger.error(f"Count mismatch: {len(images)} images, {len(labels)} labels")
        raise DataFormatError(f"Count mismatch: {len(images)} images in {image_path}, "
                              f"{len(labels)} labels in {label_path}")
    logger.info(f"Loaded {len(images)} images of {images.shape[1]}x{images.shape[2]}")
    return ImageDataset(images.astype(np.float64) / 255.0, labels.astype(np.int64))


def load_mnist_split(directory: str, prefix: str) -> ImageDataset:
    """One of the official files pairs, ``prefix`` being 'train' or 'test'."""
    files = LabConfig.MNIST_FILES
    return load_mnist(_resolve(directory, files[f'{prefix}_images']),
                      _resolve(directory, files[f'{prefix}_labels']))


def load_mnist_pair(directory: str) -> ImageDataset:
    """The official train and test files concatenated into one pool."""
    parts = [load_mnist_split(directory, prefix) for prefix in ('train', 'test')]
    return ImageDataset(np.concatenate([p.images for p in parts]), np.concatenate([p.labels for p in parts]))


def _resolve(directory: str, name: str) -> str:
    """Accept both the .gz name and its uncompressed form."""
    path = os.path.join(directory, name)
    if not os.path.exists(path) and name.endswith('.gz') and os.path.exists(path[:-3]):
        return path[:-3]
    return path


def stratified_split(ds: ImageDataset, seed: int,
                     fractions: Tuple[float, float, float] = (0.6, 0.2, 0.2)) -> ImageDataset:
    """Tag every example train/val/test, stratified by class and reproducible from ``seed``."""
    classes, counts = np.unique(ds.labels, return_counts=True)
    if counts.min() < 10:
        small = classes[counts.argmin()]
        raise SplitError(f"Class {small} has only {counts.min()} examples, need at least 10")
    train_frac, val_frac, test_frac = fractions
    idx = np.arange(len(ds))
    try:
        train_idx, rest_idx = train_test_split(idx, test_size=val_frac + test_frac, stratify=ds.labels,
                                               random_state=seed)
        val_idx, test_idx = train_test_split(rest_idx, test_size=test_frac / (val_frac + test_frac),
                                             stratify=ds.labels[rest_idx], random_state=seed)
    except ValueError as e:
        logger.error(f"Stratified split failed: {str(e)}")
        raise SplitError(str(e)) from e
    split = np.empty(len(ds), dtype=object)
    split[train_idx] = 'train'
    split[val_idx] = 'val'
    split[test_idx] = 'test'
    return ImageDataset(ds.images, ds.labels, split)


def subsample(ds: ImageDataset, sizes: Mapping[str, int], seed: int) -> ImageDataset:
    """Keep a stratified subset of each split, e.g. {"train": 10000, "val": 2000, "test": 2000}."""
    keep = []
    for tag in SPLITS:
        idx = ds.indices(tag)
        size = sizes.get(tag)
        if size is None or size >= len(idx):
            keep.append(idx)
            continue
        try:
            chosen, _ = train_test_split(idx, train_size=size, stratify=ds.labels[idx], random_state=seed)
        except ValueError as e:
            raise SplitError(f"Cannot subsample {size} from split {tag}: {e}") from e
        keep.append(np.sort(chosen))
    return ds.subset(np.concatenate(keep))


def split_counts(ds: ImageDataset) -> Dict[str, Dict[int, int]]:
    """Per-split, per-class example counts."""
    out = {}
    for tag in SPLITS:
        labels = ds.labels[ds.indices(tag)]
        classes, counts = np.unique(labels, return_counts=True)
        out[tag] = {int(c): int(n) for c, n in zip(classes, counts)}
    return out
