"""Core conditional RBM model: parameters, energies, conditionals and gradients.

The model couples a binary output vector ``v`` and binary hidden units ``h``
through a weight matrix, with a real-valued conditioning input ``u`` that
shifts the visible and hidden biases (optionally, either shift can be absent).
Everything here is a pure function of its arguments; parameter containers are
immutable after construction and safe to share between threads.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np
from scipy.special import expit, softmax

PARAMS_MAGIC = b"CRBM1"


def softplus(x):
    """Stable log(1 + exp(x)); never overflows for finite input."""
    return np.logaddexp(0.0, x)


def as_bit_array(x, name="bits"):
    """Validate and convert to a uint8 array of {0,1} values."""
    arr = np.asarray(x)
    if arr.size and not np.isin(arr, (0, 1)).all():
        raise ValueError(f"{name} must contain only 0/1 values")
    return arr.astype(np.uint8)


def as_real_array(x, name="values"):
    """Validate and convert to a float64 array of finite values."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.size and not np.isfinite(arr).all():
        raise ValueError(f"{name} must be finite (no NaN/inf)")
    return arr


def all_bit_vectors(n_bits):
    """All 2**n binary vectors of length n, in canonical (lexicographic) order.

    Row ``i`` is the binary expansion of ``i`` with bit 0 most significant,
    which matches the packed-bytes sort order used by CandidateSet.
    """
    if n_bits < 0:
        raise ValueError("n_bits must be >= 0")
    ints = np.arange(2 ** n_bits, dtype=np.int64)
    shifts = np.arange(n_bits - 1, -1, -1)
    return ((ints[:, None] >> shifts) & 1).astype(np.uint8)


def pack_bits(bits):
    """Pack a 1-D bit vector into bytes (bit 0 in the most significant slot)."""
    return np.packbits(np.asarray(bits, dtype=np.uint8)).tobytes()


class CandidateSet:
    """Deduplicated collection of equal-length binary vectors.

    Members are held in a canonical order (lexicographic on the bit
    sequence, equivalently on the packed-byte key), so iteration order is
    independent of insertion order. Construction drops duplicates.
    """

    def __init__(self, members, length=None):
        arr = np.asarray(members, dtype=np.uint8)
        if arr.ndim == 1:
            arr = arr.reshape(1, -1)
        if arr.ndim != 2:
            raise ValueError("members must be a vector or a stack of vectors")
        if arr.shape[0] == 0:
            if length is None:
                length = arr.shape[1] if arr.ndim == 2 else None
            if length is None:
                raise ValueError("empty candidate set needs an explicit length")
            arr = arr.reshape(0, length)
        if arr.size and not np.isin(arr, (0, 1)).all():
            raise ValueError("candidate members must be binary")
        if length is not None and arr.shape[1] != length:
            raise ValueError(f"members have length {arr.shape[1]}, expected {length}")
        uniq = np.unique(arr, axis=0) if arr.shape[0] else arr
        uniq.setflags(write=False)
        self._members = uniq
        self._keys = frozenset(pack_bits(row) for row in uniq)

    @classmethod
    def empty(cls, length):
        return cls(np.zeros((0, length), dtype=np.uint8), length=length)

    @property
    def members(self):
        """(m, length) uint8 array in canonical order."""
        return self._members

    @property
    def length(self):
        return self._members.shape[1]

    def __len__(self):
        return self._members.shape[0]

    def __contains__(self, bits):
        return pack_bits(bits) in self._keys

    def __iter__(self):
        return iter(self._members)

    def union(self, other):
        """Union with another CandidateSet or a (stack of) bit vector(s)."""
        extra = other.members if isinstance(other, CandidateSet) else np.atleast_2d(np.asarray(other, dtype=np.uint8))
        if extra.shape[0] == 0:
            return self
        if extra.shape[1] != self.length:
            raise ValueError("member length mismatch in union")
        return CandidateSet(np.concatenate([self._members, extra], axis=0), length=self.length)


@dataclass(frozen=True)
class CrbmParams:
    """The five parameter blocks of a conditional RBM.

    Shapes: w_vh (nv, nh), w_uv (nu, nv), w_uh (nu, nh), b_v (nv,), b_h (nh,).
    ``has_uv`` / ``has_uh`` control whether the conditioning input shifts the
    visible / hidden biases; an inactive block contributes exactly zero
    everywhere regardless of its stored values.
    """

    w_vh: np.ndarray
    w_uv: np.ndarray
    w_uh: np.ndarray
    b_v: np.ndarray
    b_h: np.ndarray
    has_uv: bool = True
    has_uh: bool = True

    def __post_init__(self):
        for name in ("w_vh", "w_uv", "w_uh", "b_v", "b_h"):
            arr = np.ascontiguousarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ValueError(f"{name} must be finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        nv, nh = self.w_vh.shape
        nu = self.w_uv.shape[0]
        if self.w_uv.shape != (nu, nv):
            raise ValueError(f"w_uv shape {self.w_uv.shape} != ({nu}, {nv})")
        if self.w_uh.shape != (nu, nh):
            raise ValueError(f"w_uh shape {self.w_uh.shape} != ({nu}, {nh})")
        if self.b_v.shape != (nv,):
            raise ValueError(f"b_v shape {self.b_v.shape} != ({nv},)")
        if self.b_h.shape != (nh,):
            raise ValueError(f"b_h shape {self.b_h.shape} != ({nh},)")

    @property
    def n_visible(self):
        return self.w_vh.shape[0]

    @property
    def n_hidden(self):
        return self.w_vh.shape[1]

    @property
    def n_cond(self):
        return self.w_uv.shape[0]

    @classmethod
    def zeros(cls, n_visible, n_cond, n_hidden, has_uv=True, has_uh=True):
        return cls(
            w_vh=np.zeros((n_visible, n_hidden)),
            w_uv=np.zeros((n_cond, n_visible)),
            w_uh=np.zeros((n_cond, n_hidden)),
            b_v=np.zeros(n_visible),
            b_h=np.zeros(n_hidden),
            has_uv=has_uv,
            has_uh=has_uh,
        )

    def replace(self, **blocks):
        fields = dict(
            w_vh=self.w_vh, w_uv=self.w_uv, w_uh=self.w_uh,
            b_v=self.b_v, b_h=self.b_h, has_uv=self.has_uv, has_uh=self.has_uh,
        )
        fields.update(blocks)
        return CrbmParams(**fields)


@dataclass
class Gradients:
    """Per-block gradient accumulator, shape-mirroring CrbmParams."""

    w_vh: np.ndarray
    w_uv: np.ndarray
    w_uh: np.ndarray
    b_v: np.ndarray
    b_h: np.ndarray

    BLOCKS = ("w_vh", "w_uv", "w_uh", "b_v", "b_h")

    @classmethod
    def zeros_like(cls, params):
        return cls(*(np.zeros_like(getattr(params, b)) for b in cls.BLOCKS))

    def add_scaled(self, other, scale=1.0):
        """In-place self += scale * other."""
        for b in self.BLOCKS:
            buf = getattr(self, b)
            buf += scale * getattr(other, b)
        return self

    def scale(self, factor):
        for b in self.BLOCKS:
            getattr(self, b).__imul__(factor)
        return self

    def zero(self):
        for b in self.BLOCKS:
            getattr(self, b).fill(0.0)
        return self


def _check_len(arr, expected, name):
    if arr.shape[-1] != expected:
        raise ValueError(f"{name} has length {arr.shape[-1]}, expected {expected}")


def conditioned_biases(u, params):
    """Visible and hidden bias terms with the conditioning shift folded in.

    Returns (a_v, a_h) where a_v = b_v + u @ w_uv when the u->v block is
    active (b_v alone otherwise) and a_h likewise for the hidden side.
    Accepts a single input vector or a (B, nu) batch.
    """
    u = np.asarray(u, dtype=np.float64)
    _check_len(u, params.n_cond, "u")
    a_v = params.b_v
    a_h = params.b_h
    if params.has_uv:
        a_v = a_v + u @ params.w_uv
    else:
        a_v = np.broadcast_to(a_v, u.shape[:-1] + a_v.shape)
    if params.has_uh:
        a_h = a_h + u @ params.w_uh
    else:
        a_h = np.broadcast_to(a_h, u.shape[:-1] + a_h.shape)
    return a_v, a_h


def energy(v, h, u, params):
    """Joint energy of a full (v, h) configuration given input u."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_len(v, params.n_visible, "v")
    _check_len(h, params.n_hidden, "h")
    _check_len(u, params.n_cond, "u")
    e = -(v @ params.w_vh @ h) - v @ params.b_v - h @ params.b_h
    if params.has_uv:
        e -= u @ params.w_uv @ v
    if params.has_uh:
        e -= u @ params.w_uh @ h
    return float(e)


def free_energy(v, u, params):
    """Free energy F(v, u) with hidden units summed out analytically.

    ``v`` may be binary or any vector in [0,1]^nv (mean-field iterates reuse
    this path). Accepts single vectors or batches; a 2-D ``v`` with a 1-D
    ``u`` broadcasts the one input across all rows. Single vectors are
    evaluated through the same batched kernel, so scalar and batched calls
    agree bit for bit.
    """
    v = np.asarray(v, dtype=np.float64)
    _check_len(v, params.n_visible, "v")
    scalar = v.ndim == 1 and np.asarray(u).ndim == 1
    v2 = np.atleast_2d(v)
    a_v, a_h = conditioned_biases(np.atleast_2d(np.asarray(u, dtype=np.float64)), params)
    act = a_h + v2 @ params.w_vh
    f = -softplus(act).sum(axis=-1) - (v2 * a_v).sum(axis=-1)
    return float(f[0]) if scalar else f


def hidden_probs(v, u, params):
    """Factorial Bernoulli means p(h_j = 1 | v, u)."""
    v = np.asarray(v, dtype=np.float64)
    _check_len(v, params.n_visible, "v")
    scalar = v.ndim == 1 and np.asarray(u).ndim == 1
    _, a_h = conditioned_biases(np.atleast_2d(np.asarray(u, dtype=np.float64)), params)
    out = expit(a_h + np.atleast_2d(v) @ params.w_vh)
    return out[0] if scalar else out


def visible_probs(h, u, params):
    """Factorial Bernoulli means p(v_i = 1 | h, u)."""
    h = np.asarray(h, dtype=np.float64)
    _check_len(h, params.n_hidden, "h")
    scalar = h.ndim == 1 and np.asarray(u).ndim == 1
    a_v, _ = conditioned_biases(np.atleast_2d(np.asarray(u, dtype=np.float64)), params)
    out = expit(a_v + np.atleast_2d(h) @ params.w_vh.T)
    return out[0] if scalar else out


def conditional_over_set(u, candidates, params):
    """Conditional distribution over a candidate set, normalized within it.

    Returns a probability vector aligned with ``candidates.members`` (the
    canonical order); computed as a max-stabilized softmax of the negated
    free energies, so it sums to 1 up to float rounding.
    """
    if len(candidates) == 0:
        raise ValueError("candidate set is empty")
    f = free_energy(candidates.members.astype(np.float64), u, params)
    return softmax(-f)


def brute_force_conditional(u, params, max_bits=20):
    """Exact conditional over the full output space by enumeration.

    Only valid for small models; refuses more than ``max_bits`` output bits.
    Returns (candidates, probs) with candidates in canonical order.
    """
    nv = params.n_visible
    if nv > max_bits:
        raise ValueError(f"refusing to enumerate 2**{nv} outputs (limit {max_bits} bits)")
    members = all_bit_vectors(nv)
    candidates = CandidateSet(members, length=nv)
    return candidates, conditional_over_set(u, candidates, params)


def free_energy_grad(v, u, params):
    """Gradient of free_energy(v, u) with respect to every parameter block.

    With s = p(h=1 | v, u): d/dw_vh = -v s^T, d/dw_uh = -u s^T, d/db_h = -s,
    d/db_v = -v, d/dw_uv = -u v^T. Inactive blocks get zero gradients.
    """
    v = np.asarray(v, dtype=np.float64)
    u = np.asarray(u, dtype=np.float64)
    _check_len(v, params.n_visible, "v")
    s = hidden_probs(v, u, params)
    g = Gradients.zeros_like(params)
    g.w_vh -= np.outer(v, s)
    g.b_h -= s
    g.b_v -= v
    if params.has_uh:
        g.w_uh -= np.outer(u, s)
    if params.has_uv:
        g.w_uv -= np.outer(u, v)
    return g


def save_params(path, params):
    """Write parameters in the flat binary format.

    Layout: magic "CRBM1"; little-endian u32 nv, nu, nh; two flag bytes
    (has_uv, has_uh); then row-major little-endian f64 blocks in the order
    w_vh, w_uv, w_uh, b_v, b_h. Inactive blocks are written as zeros.
    """
    nv, nu, nh = params.n_visible, params.n_cond, params.n_hidden
    with open(path, "wb") as fh:
        fh.write(PARAMS_MAGIC)
        fh.write(struct.pack("<III", nv, nu, nh))
        fh.write(bytes([int(params.has_uv), int(params.has_uh)]))
        for name in ("w_vh", "w_uv", "w_uh", "b_v", "b_h"):
            block = getattr(params, name)
            if (name == "w_uv" and not params.has_uv) or (name == "w_uh" and not params.has_uh):
                block = np.zeros_like(block)
            fh.write(np.ascontiguousarray(block, dtype="<f8").tobytes())


def load_params(path):
    """Read parameters written by save_params; inactive blocks load as zeros."""
    with open(path, "rb") as fh:
        blob = fh.read()
    head = len(PARAMS_MAGIC)
    if blob[:head] != PARAMS_MAGIC:
        raise ValueError(f"bad magic in {path!r}: not a CRBM parameter file")
    nv, nu, nh = struct.unpack_from("<III", blob, head)
    off = head + 12
    if len(blob) < off + 2:
        raise ValueError(f"truncated parameter file {path!r}")
    has_uv, has_uh = bool(blob[off]), bool(blob[off + 1])
    off += 2
    shapes = [(nv, nh), (nu, nv), (nu, nh), (nv,), (nh,)]
    total = sum(int(np.prod(s)) for s in shapes) * 8
    if len(blob) != off + total:
        raise ValueError(f"parameter file {path!r} has {len(blob) - off} payload bytes, expected {total}")
    blocks = []
    for shape in shapes:
        n = int(np.prod(shape))
        blocks.append(np.frombuffer(blob, dtype="<f8", count=n, offset=off).reshape(shape).copy())
        off += n * 8
    w_vh, w_uv, w_uh, b_v, b_h = blocks
    if not has_uv:
        w_uv = np.zeros_like(w_uv)
    if not has_uh:
        w_uh = np.zeros_like(w_uh)
    return CrbmParams(w_vh=w_vh, w_uv=w_uv, w_uh=w_uh, b_v=b_v, b_h=b_h,
                      has_uv=has_uv, has_uh=has_uh)
