"""Spectral-hash codes over conditioning inputs and candidate-set retrieval.

Inputs are projected onto their top principal components; each code bit is
the sign of a one-dimensional sinusoidal eigenfunction evaluated on one
projected coordinate, with eigenfunctions ranked by (mode / range)^2 so wider
directions contribute lower-frequency bits first. The index maps each code to
the deduplicated set of training targets whose inputs hashed there; retrieval
unions the buckets of the query code and its single-bit flips.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from .model import CandidateSet

INDEX_MAGIC = b"SHIX1"


@dataclass(frozen=True)
class SpectralHashConfig:
    n_bits: int
    pca_dims: int | None = None  # defaults to min(n_bits, input dim)
    outlier_clip: float = 0.01
    hamming_radius: int = 1

    def __post_init__(self):
        if self.n_bits < 1:
            raise ValueError("n_bits must be >= 1")
        if self.pca_dims is not None and self.pca_dims < 1:
            raise ValueError("pca_dims must be >= 1")
        if not 0.0 <= self.outlier_clip < 0.5:
            raise ValueError("outlier_clip must be in [0, 0.5)")
        if self.hamming_radius < 0:
            raise ValueError("hamming_radius must be >= 0")


@dataclass
class SpectralHashIndex:
    """Fitted coder plus the code -> candidate-set table."""

    mean: np.ndarray        # (d,)
    components: np.ndarray  # (pca_dims, d), orthonormal rows
    ranges: np.ndarray      # (pca_dims, 2) per-dimension (low, high)
    selected: np.ndarray    # (n_bits, 2) int (dimension, mode) pairs
    n_bits: int
    target_len: int
    table: dict = field(default_factory=dict)  # packed code bytes -> CandidateSet
    hamming_radius: int = 1


def fit(inputs, config):
    """Learn the coder pieces: PCA basis, projected ranges, selected eigenfunctions.

    Returns (mean, components, ranges, selected). Projected dimensions whose
    clipped range collapses to a point are excluded from bit candidacy; it is
    an error if fewer than n_bits eigenfunction candidates remain.
    """
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 2:
        raise ValueError("fit needs a 2-D array with at least 2 inputs")
    n, d = x.shape
    pca_dims = config.pca_dims if config.pca_dims is not None else min(config.n_bits, d)
    if pca_dims > d:
        raise ValueError(f"pca_dims {pca_dims} exceeds input dimension {d}")
    mean = x.mean(axis=0)
    centered = x - mean
    cov = centered.T @ centered / (n - 1)
    evals, evecs = np.linalg.eigh(cov)
    order = np.argsort(evals)[::-1][:pca_dims]
    components = evecs[:, order].T.copy()
    # reproducible sign: largest-magnitude entry of each component positive
    for row in components:
        if row[np.argmax(np.abs(row))] < 0:
            row *= -1.0
    proj = centered @ components.T
    lo = np.quantile(proj, config.outlier_clip, axis=0)
    hi = np.quantile(proj, 1.0 - config.outlier_clip, axis=0)
    ranges = np.stack([lo, hi], axis=1)
    candidates = []
    for j in range(pca_dims):
        width = hi[j] - lo[j]
        if width <= 0:
            continue
        for m in range(1, config.n_bits + 1):
            candidates.append(((m / width) ** 2, j, m))
    candidates.sort()
    if len(candidates) < config.n_bits:
        raise ValueError(
            f"only {len(candidates)} usable eigenfunctions for {config.n_bits} bits "
            "(too many degenerate projected dimensions)"
        )
    selected = np.array([(j, m) for _, j, m in candidates[: config.n_bits]], dtype=np.int64)
    return mean, components, ranges, selected


def encode(u, index):
    """The n-bit code of one input under a fitted index."""
    u = np.asarray(u, dtype=np.float64)
    if u.shape != index.mean.shape:
        raise ValueError(f"input has shape {u.shape}, index expects {index.mean.shape}")
    x = index.components @ (u - index.mean)
    dims = index.selected[:, 0]
    modes = index.selected[:, 1]
    lo = index.ranges[dims, 0]
    hi = index.ranges[dims, 1]
    t = np.clip((x[dims] - lo) / (hi - lo), 0.0, 1.0)
    return (np.sin(np.pi / 2 + modes * np.pi * t) > 0).astype(np.uint8)


def pack_code(code):
    return np.packbits(np.asarray(code, dtype=np.uint8)).tobytes()


def hamming_ball_codes(code, radius):
    """All codes within the given hamming radius, the center first.

    Radius 1 yields exactly n_bits + 1 codes.
    """
    code = np.asarray(code, dtype=np.uint8)
    out = [code.copy()]
    for r in range(1, radius + 1):
        for positions in combinations(range(code.size), r):
            flipped = code.copy()
            flipped[list(positions)] ^= 1
            out.append(flipped)
    return out


def build_index(inputs, targets, config):
    """Fit the coder on the inputs and bucket every target under its input's code."""
    inputs = np.asarray(inputs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.uint8)
    if len(inputs) != len(targets) or len(inputs) == 0:
        raise ValueError("need equally many (non-zero) inputs and targets")
    mean, components, ranges, selected = fit(inputs, config)
    index = SpectralHashIndex(
        mean=mean, components=components, ranges=ranges, selected=selected,
        n_bits=config.n_bits, target_len=targets.shape[1],
        hamming_radius=config.hamming_radius,
    )
    buckets: dict[bytes, list] = {}
    for u, v in zip(inputs, targets):
        buckets.setdefault(pack_code(encode(u, index)), []).append(v)
    index.table = {
        key: CandidateSet(np.array(rows), length=index.target_len)
        for key, rows in buckets.items()
    }
    return index


def retrieve(u, index, radius=None):
    """Union of the buckets of the query code and its hamming-ball neighbours.

    With the default radius 1 this is exactly n_bits + 1 table lookups.
    Missing buckets contribute nothing; the result may be empty.
    """
    if radius is None:
        radius = index.hamming_radius
    code = encode(u, index)
    pieces = []
    for candidate in hamming_ball_codes(code, radius):
        bucket = index.table.get(pack_code(candidate))
        if bucket is not None and len(bucket):
            pieces.append(bucket.members)
    if not pieces:
        return CandidateSet.empty(index.target_len)
    return CandidateSet(np.concatenate(pieces, axis=0), length=index.target_len)


def save_index(path, index):
    """Serialize the index: header, coder blocks as f64, selected pairs, table."""
    d = index.mean.shape[0]
    pca_dims = index.components.shape[0]
    code_bytes = (index.n_bits + 7) // 8
    member_bytes = (index.target_len + 7) // 8
    with open(path, "wb") as fh:
        fh.write(INDEX_MAGIC)
        fh.write(struct.pack("<IIIII", d, pca_dims, index.n_bits, index.target_len,
                             len(index.table)))
        fh.write(struct.pack("<B", index.hamming_radius))
        fh.write(np.ascontiguousarray(index.mean, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(index.components, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(index.ranges, dtype="<f8").tobytes())
        fh.write(np.ascontiguousarray(index.selected, dtype="<u4").tobytes())
        for key in sorted(index.table):
            members = index.table[key].members
            assert len(key) == code_bytes
            fh.write(key)
            fh.write(struct.pack("<I", len(members)))
            for row in members:
                fh.write(np.packbits(row).tobytes().ljust(member_bytes, b"\x00"))


def load_index(path):
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(INDEX_MAGIC)
    if blob[:head] != INDEX_MAGIC:
        raise ValueError(f"bad magic in {path!r}: not a spectral-hash index file")
    d, pca_dims, n_bits, target_len, n_buckets = struct.unpack_from("<IIIII", blob, head)
    off = head + 20
    (radius,) = struct.unpack_from("<B", blob, off)
    off += 1

    def take_f64(count, shape):
        nonlocal off
        arr = np.frombuffer(blob, dtype="<f8", count=count, offset=off).reshape(shape).copy()
        off += count * 8
        return arr

    mean = take_f64(d, (d,))
    components = take_f64(pca_dims * d, (pca_dims, d))
    ranges = take_f64(pca_dims * 2, (pca_dims, 2))
    selected = np.frombuffer(blob, dtype="<u4", count=n_bits * 2, offset=off).reshape(n_bits, 2).astype(np.int64)
    off += n_bits * 8
    code_bytes = (n_bits + 7) // 8
    member_bytes = (target_len + 7) // 8
    table = {}
    for _ in range(n_buckets):
        key = blob[off:off + code_bytes]
        off += code_bytes
        (count,) = struct.unpack_from("<I", blob, off)
        off += 4
        rows = np.empty((count, target_len), dtype=np.uint8)
        for i in range(count):
            packed = np.frombuffer(blob, dtype=np.uint8, count=member_bytes, offset=off)
            rows[i] = np.unpackbits(packed)[:target_len]
            off += member_bytes
        table[key] = CandidateSet(rows, length=target_len)
    if off != len(blob):
        raise ValueError(f"trailing bytes in index file {path!r}")
    return SpectralHashIndex(
        mean=mean, components=components, ranges=ranges, selected=selected,
        n_bits=n_bits, target_len=target_len, table=table, hamming_radius=radius,
    )
