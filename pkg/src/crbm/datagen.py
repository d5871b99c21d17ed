"""Synthetic and bundled corpora for running the benchmarks offline.

`digit_corpus` serves 28x28 handwritten digits: real MNIST IDX files when
CRBM_MNIST_DIR (or an explicit directory) provides them, otherwise the
bundled scikit-learn digit scans upsampled from 8x8 with small random shifts
to reach the requested corpus sizes. Splits are made at the level of source
digits so no augmented copy of one digit crosses a split boundary.

`correlated_label_dataset` is a multi-label generator with known structure:
inputs are noisy cluster points on a line and the label vector is a fixed
per-cluster pattern. Two of the labels alternate along the cluster line, so
no per-label linear classifier can separate them, while a predictor that
recovers the cluster jointly can.
"""

from __future__ import annotations

import os

import numpy as np

from .data import MultiLabelDataset, load_idx_images

DIGIT_SIZE = 28

# cluster -> label pattern; labels 0 and 1 alternate along the cluster line
LABEL_PATTERNS = np.array([
    [1, 0, 1, 1, 0, 0, 1, 0, 0, 1],
    [0, 1, 1, 0, 1, 0, 0, 1, 0, 1],
    [1, 0, 0, 1, 1, 0, 0, 0, 1, 1],
    [0, 1, 0, 1, 0, 1, 1, 0, 1, 0],
    [1, 0, 1, 0, 0, 1, 0, 1, 1, 0],
    [0, 1, 0, 0, 1, 1, 1, 1, 0, 0],
], dtype=np.uint8)


def _shift_image(img, dy, dx):
    out = np.zeros_like(img)
    src_r = slice(max(0, -dy), img.shape[0] - max(0, dy))
    src_c = slice(max(0, -dx), img.shape[1] - max(0, dx))
    dst_r = slice(max(0, dy), img.shape[0] - max(0, -dy))
    dst_c = slice(max(0, dx), img.shape[1] - max(0, -dx))
    out[dst_r, dst_c] = img[src_r, src_c]
    return out


def _base_digits_from_sklearn():
    from sklearn.datasets import load_digits

    raw = load_digits().images / 16.0  # (1797, 8, 8) in [0, 1]
    big = np.kron(raw, np.ones((4, 4)))  # 32x32 blocks
    return big[:, 2:30, 2:30]  # center-crop to 28x28


def _base_digits_from_mnist(mnist_dir):
    images = []
    for name in ("train-images-idx3-ubyte", "t10k-images-idx3-ubyte"):
        path = os.path.join(mnist_dir, name)
        if os.path.exists(path):
            imgs, rows, cols = load_idx_images(path)
            if (rows, cols) != (DIGIT_SIZE, DIGIT_SIZE):
                raise ValueError(f"{path}: expected 28x28 images")
            images.append(imgs.reshape(-1, DIGIT_SIZE, DIGIT_SIZE))
    if not images:
        raise FileNotFoundError(f"no IDX image files under {mnist_dir}")
    return np.concatenate(images, axis=0)


def _augment(base, count, rng):
    """Original images first, then randomly shifted copies up to ``count``."""
    n = len(base)
    if count <= n:
        return base[:count].reshape(count, -1)
    out = np.empty((count, DIGIT_SIZE * DIGIT_SIZE))
    out[:n] = base.reshape(n, -1)
    for i in range(n, count):
        src = int(rng.integers(0, n))
        dy, dx = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
        out[i] = _shift_image(base[src], dy, dx).reshape(-1)
    return out


def digit_corpus(n_train, n_valid, n_test, seed=0, mnist_dir=None):
    """Grayscale digit images in [0,1] for the denoising benchmarks.

    Returns (train, valid, test) arrays of shape (n, 784). Source digits are
    shuffled and partitioned before any augmentation, so the three splits
    never share a source digit.
    """
    mnist_dir = mnist_dir or os.environ.get("CRBM_MNIST_DIR")
    if mnist_dir:
        base = _base_digits_from_mnist(mnist_dir)
    else:
        base = _base_digits_from_sklearn()
    rng = np.random.default_rng([seed, 901])
    order = rng.permutation(len(base))
    base = base[order]
    total = n_train + n_valid + n_test
    # carve source digits proportionally to the requested split sizes
    n_src_train = max(1, int(len(base) * n_train / total))
    n_src_valid = max(1, int(len(base) * n_valid / total))
    parts = (
        base[:n_src_train],
        base[n_src_train:n_src_train + n_src_valid],
        base[n_src_train + n_src_valid:],
    )
    sizes = (n_train, n_valid, n_test)
    out = []
    for i, (part, size) in enumerate(zip(parts, sizes)):
        if len(part) == 0:
            raise ValueError("not enough source digits for the requested split")
        out.append(_augment(part, size, np.random.default_rng([seed, 902, i])))
    return tuple(out)


def correlated_label_dataset(n_samples, seed=0, n_features=8, noise=0.55, spacing=1.2):
    """Cluster-structured multi-label data with known label correlations.

    Inputs are Gaussian blobs centered on a line; targets are the fixed
    per-cluster patterns in LABEL_PATTERNS.
    """
    n_clusters, n_labels = LABEL_PATTERNS.shape
    if n_features < 2:
        raise ValueError("need at least 2 features")
    rng = np.random.default_rng([seed, 903])
    centers = np.zeros((n_clusters, n_features))
    centers[:, 0] = (np.arange(n_clusters) - (n_clusters - 1) / 2) * spacing
    offset_rng = np.random.default_rng(904)  # fixed geometry across seeds
    centers[:, 1:] = offset_rng.normal(0.0, 0.15, (n_clusters, n_features - 1))
    assignments = rng.integers(0, n_clusters, n_samples)
    inputs = centers[assignments] + rng.normal(0.0, noise, (n_samples, n_features))
    targets = LABEL_PATTERNS[assignments]
    return MultiLabelDataset(inputs, targets.copy())


def make_pair_images(clean_bits, kind, rng, width, height, rate=0.1, patch=8):
    """Corrupt every clean image; returns the noisy (n, pixels) float array."""
    from .data import corrupt_flip, corrupt_occlude

    noisy = np.empty(clean_bits.shape, dtype=np.float64)
    for i, v in enumerate(clean_bits):
        if kind == "flip":
            noisy[i] = corrupt_flip(v, rate, rng)
        elif kind == "occlude":
            noisy[i] = corrupt_occlude(v, patch, width, height, rng)
        else:
            raise ValueError(f"unknown noise kind {kind!r}")
    return noisy


def denoise_corpus(n_train, n_valid, n_test, kind, seed=0, rate=0.1, patch=8, mnist_dir=None):
    """Binarized digit splits with their corrupted inputs.

    Returns {"train"/"valid"/"test": (noisy inputs, clean bit targets)}.
    """
    from .data import binarize

    grays = digit_corpus(n_train, n_valid, n_test, seed=seed, mnist_dir=mnist_dir)
    rng = np.random.default_rng([seed, 905])
    out = {}
    for name, gray in zip(("train", "valid", "test"), grays):
        clean = binarize(gray)
        noisy = make_pair_images(clean, kind, rng, DIGIT_SIZE, DIGIT_SIZE,
                                 rate=rate, patch=patch)
        out[name] = (noisy, clean)
    return out
