"""Dataset containers, file loaders, noise processes and fold splitting.

Multi-label data lives in a small self-describing text format (see
load_multilabel); images use the standard big-endian IDX encoding. Noise
processes are pure: they return a fresh real-valued conditioning vector and
never touch the clean input.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801


@dataclass
class MultiLabelDataset:
    """Feature vectors with binary label vectors of a fixed length."""

    inputs: np.ndarray   # (n, n_features) float64
    targets: np.ndarray  # (n, n_labels) uint8

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.uint8)
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if len(self.inputs) != len(self.targets):
            raise ValueError("inputs and targets must have equal length")
        if self.inputs.size and not np.isfinite(self.inputs).all():
            raise ValueError("inputs must be finite")
        if self.targets.size and not np.isin(self.targets, (0, 1)).all():
            raise ValueError("targets must be binary")

    @property
    def n_labels(self):
        return self.targets.shape[1]

    @property
    def n_features(self):
        return self.inputs.shape[1]

    def __len__(self):
        return len(self.inputs)

    def subset(self, indices):
        return MultiLabelDataset(self.inputs[indices], self.targets[indices])


@dataclass
class ImagePairDataset:
    """Aligned clean binary images and their noisy real-valued versions."""

    noisy: np.ndarray  # (n, width*height) float64
    clean: np.ndarray  # (n, width*height) uint8
    width: int
    height: int

    def __post_init__(self):
        self.noisy = np.asarray(self.noisy, dtype=np.float64)
        self.clean = np.asarray(self.clean, dtype=np.uint8)
        pixels = self.width * self.height
        if self.noisy.shape != self.clean.shape or self.noisy.shape[1] != pixels:
            raise ValueError("clean/noisy shapes must both be (n, width*height)")

    def __len__(self):
        return len(self.clean)

    def subset(self, indices):
        return ImagePairDataset(self.noisy[indices], self.clean[indices], self.width, self.height)


@dataclass(frozen=True)
class FoldSpec:
    """One seeded 80/10/10 resplit of a dataset."""

    fold: int
    seed: int
    fractions: tuple = (0.8, 0.1, 0.1)

    def __post_init__(self):
        if abs(sum(self.fractions) - 1.0) > 1e-12 or len(self.fractions) != 3:
            raise ValueError("fractions must be three values summing to 1")


def load_multilabel(path):
    """Parse the multi-label text format.

    First line: ``D L`` (feature count, label count). Every following line:
    D space-separated reals, a ``|`` separator token, then L space-separated
    0/1 labels. Malformed content raises with the offending line number.
    """
    with open(path, "r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ValueError(f"{path}: empty file")
    head = lines[0].split()
    if len(head) != 2:
        raise ValueError(f"{path}: line 1: header must be 'D L'")
    try:
        n_features, n_labels = int(head[0]), int(head[1])
    except ValueError:
        raise ValueError(f"{path}: line 1: header must be two integers") from None
    if n_features < 1 or n_labels < 1:
        raise ValueError(f"{path}: line 1: feature and label counts must be positive")
    inputs, targets = [], []
    for lineno, line in enumerate(lines[1:], start=2):
        tokens = line.split()
        if len(tokens) != n_features + 1 + n_labels:
            raise ValueError(
                f"{path}: line {lineno}: expected {n_features} features, '|' and "
                f"{n_labels} labels, got {len(tokens)} tokens"
            )
        if tokens[n_features] != "|":
            raise ValueError(f"{path}: line {lineno}: missing '|' separator")
        try:
            feats = [float(t) for t in tokens[:n_features]]
        except ValueError:
            raise ValueError(f"{path}: line {lineno}: bad feature value") from None
        if not all(np.isfinite(feats)):
            raise ValueError(f"{path}: line {lineno}: non-finite feature")
        labels = tokens[n_features + 1:]
        if any(t not in ("0", "1") for t in labels):
            raise ValueError(f"{path}: line {lineno}: labels must be 0 or 1")
        inputs.append(feats)
        targets.append([int(t) for t in labels])
    return MultiLabelDataset(
        np.array(inputs, dtype=np.float64).reshape(len(inputs), n_features),
        np.array(targets, dtype=np.uint8).reshape(len(targets), n_labels),
    )


def save_multilabel(path, dataset):
    """Write the multi-label text format; floats round-trip exactly."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{dataset.n_features} {dataset.n_labels}\n")
        for u, v in zip(dataset.inputs, dataset.targets):
            feats = " ".join(f"{x:.17g}" for x in u)
            labels = " ".join(str(int(b)) for b in v)
            fh.write(f"{feats} | {labels}\n")


def load_idx_images(path):
    """Read an IDX3 image file; returns (images scaled to [0,1], rows, cols)."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 16:
        raise ValueError(f"{path}: truncated IDX image header")
    magic, count, rows, cols = struct.unpack_from(">IIII", blob, 0)
    if magic != IDX_IMAGES_MAGIC:
        raise ValueError(f"{path}: bad IDX image magic 0x{magic:08x}")
    expected = 16 + count * rows * cols
    if len(blob) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, found {len(blob)}")
    pixels = np.frombuffer(blob, dtype=np.uint8, offset=16).astype(np.float64) / 255.0
    return pixels.reshape(count, rows * cols), rows, cols


def save_idx_images(path, images, rows, cols):
    """Write images (values in [0,1]) as a standard IDX3 file."""
    images = np.asarray(images, dtype=np.float64)
    if images.ndim != 2 or images.shape[1] != rows * cols:
        raise ValueError("images must be (n, rows*cols)")
    if images.size and (images.min() < 0 or images.max() > 1):
        raise ValueError("image values must lie in [0, 1]")
    payload = np.round(images * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IDX_IMAGES_MAGIC, len(images), rows, cols))
        fh.write(payload.tobytes())


def load_idx_labels(path):
    """Read an IDX1 label file into a uint8 vector."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 8:
        raise ValueError(f"{path}: truncated IDX label header")
    magic, count = struct.unpack_from(">II", blob, 0)
    if magic != IDX_LABELS_MAGIC:
        raise ValueError(f"{path}: bad IDX label magic 0x{magic:08x}")
    if len(blob) != 8 + count:
        raise ValueError(f"{path}: expected {8 + count} bytes, found {len(blob)}")
    return np.frombuffer(blob, dtype=np.uint8, offset=8).copy()


def binarize(images):
    """Threshold pixel values: 1 iff strictly above 0.5."""
    arr = np.asarray(images, dtype=np.float64)
    if arr.size and (arr.min() < 0 or arr.max() > 1):
        raise ValueError("pixel values must lie in [0, 1]")
    return (arr > 0.5).astype(np.uint8)


def corrupt_flip(v, rate, rng):
    """Flip an exact round(rate * len) count of distinct random positions.

    Returns the noisy vector as floats; the input is untouched.
    """
    if not 0.0 <= rate <= 1.0:
        raise ValueError("flip rate must lie in [0, 1]")
    v = np.asarray(v, dtype=np.uint8)
    out = v.astype(np.float64)
    n_flip = int(round(rate * v.size))
    if n_flip:
        positions = rng.choice(v.size, size=n_flip, replace=False)
        out[positions] = 1.0 - out[positions]
    return out


def corrupt_occlude(v, patch, width, height, rng):
    """Zero a uniformly placed patch x patch block of a row-major image."""
    v = np.asarray(v, dtype=np.uint8)
    if v.size != width * height:
        raise ValueError(f"image has {v.size} pixels, expected {width}x{height}")
    if patch > width or patch > height:
        raise ValueError("image too small for the occlusion patch")
    row = int(rng.integers(0, height - patch + 1))
    col = int(rng.integers(0, width - patch + 1))
    img = v.astype(np.float64).reshape(height, width)
    img[row:row + patch, col:col + patch] = 0.0
    return img.reshape(-1)


def fold_indices(spec, n_items):
    """Index triple (train, valid, test) for one seeded permutation split.

    Validation and test take floor(fraction * n) items each; the remainder
    goes to training.
    """
    rng = np.random.default_rng([spec.seed, spec.fold])
    perm = rng.permutation(n_items)
    n_valid = int(spec.fractions[1] * n_items + 1e-9)
    n_test = int(spec.fractions[2] * n_items + 1e-9)
    n_train = n_items - n_valid - n_test
    if n_train < 1 or n_valid < 1 or n_test < 1:
        raise ValueError(f"dataset of size {n_items} is too small to split")
    return (
        perm[:n_train],
        perm[n_train:n_train + n_valid],
        perm[n_train + n_valid:],
    )


def make_folds(dataset, n_folds=10, seed=0):
    """Seeded random 80/10/10 resplits; reproducible from the seed."""
    n = len(dataset)
    if n < 2 * n_folds:
        raise ValueError(f"dataset of size {n} is too small for {n_folds} folds")
    return [fold_indices(FoldSpec(fold=f, seed=seed), n) for f in range(n_folds)]
