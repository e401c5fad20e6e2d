"""Random embeddings: Gaussian, subsampled and hashed trigonometric transforms.

An operator stores only *unscaled* randomness (normal draws, sign flips,
sample indices, hash buckets). Scale factors depend on the current sketch
dimension and are applied when the operator is used, so an operator can be
extended with more columns without touching what was already drawn.

Right sketches (``A @ X``, X is n x r)::

    Gaussian  X = G / sqrt(r)
    SRTT      X = D F S sqrt(n / r)
    HRTT      X = D F H

Left sketches (``Y @ B``, Y is r x m) use the transposed layouts, e.g.
``Y = sqrt(m / r) S F D`` for SRTT.

Here D holds random signs, F is an orthonormal trigonometric transform, S
selects distinct coordinates and H is a CountSketch-style hash (every
coordinate lands in one bucket with a random sign). All randomness comes
from a Philox counter-based generator keyed by the operator seed; the
generator state after the last draw is kept so extensions continue the same
stream.
"""
import enum
import hashlib
from dataclasses import dataclass, field, replace
from typing import Optional, Tuple, Union

import numpy as np
import scipy.fft as sfft
import scipy.sparse as sp

from .errors import ConfigError, DimensionError
from .linalg import as_dense

SEED_MASK = (1 << 64) - 1
# Above this many entries the Gaussian block is regenerated per application.
GAUSSIAN_STORE_LIMIT = 10**8


class Transform(enum.Enum):
    DCT = "dct"
    HADAMARD = "hadamard"

    @property
    def eta(self):
        """``m * max |F_ij|^2`` for the orthonormal transform."""
        return 2 if self is Transform.DCT else 1


@dataclass(frozen=True)
class Gaussian:
    pass


@dataclass(frozen=True)
class SRTT:
    transform: Transform = Transform.DCT


@dataclass(frozen=True)
class HRTT:
    transform: Transform = Transform.DCT


SketchKind = Union[Gaussian, SRTT, HRTT]


def kind_name(kind):
    if isinstance(kind, Gaussian):
        return "gaussian"
    prefix = "srtt" if isinstance(kind, SRTT) else "hrtt"
    return f"{prefix}-{kind.transform.value}"


def parse_kind(text):
    """Parse ``gaussian``, ``srtt``, ``srtt-hadamard``, ``hrtt-dct`` etc."""
    text = text.strip().lower()
    if text == "gaussian":
        return Gaussian()
    base, _, tname = text.partition("-")
    try:
        transform = Transform(tname) if tname else Transform.DCT
    except ValueError:
        raise ConfigError(f"unknown transform in sketch kind {text!r}") from None
    if base == "srtt":
        return SRTT(transform)
    if base == "hrtt":
        return HRTT(transform)
    raise ConfigError(f"unknown sketch kind {text!r}")


def derive_seed(seed, label):
    """64-bit sub-seed from a parent seed and a label (stable across runs)."""
    digest = hashlib.blake2b(f"{int(seed) & SEED_MASK}:{label}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _generator(seed):
    return np.random.Generator(np.random.Philox(int(seed) & SEED_MASK))


def _resume(state):
    bitgen = np.random.Philox()
    bitgen.state = state
    return np.random.Generator(bitgen)


# ---------------------------------------------------------------- transforms

def _is_power_of_two(n):
    return n >= 1 and n & (n - 1) == 0


def _fwht(x, axis):
    """Orthonormal Walsh-Hadamard transform (Sylvester ordering) along ``axis``."""
    x = np.moveaxis(np.asarray(x, dtype=np.float64), axis, -1)
    lead = x.shape[:-1]
    n = x.shape[-1]
    y = x.reshape(-1, n).copy()
    rows = y.shape[0]
    h = 1
    while h < n:
        y = y.reshape(rows, n // (2 * h), 2, h)
        a = y[:, :, 0, :]
        b = y[:, :, 1, :]
        y = np.stack((a + b, a - b), axis=2)
        h *= 2
    y = y.reshape(lead + (n,)) / np.sqrt(n)
    return np.moveaxis(y, -1, axis)


def orthonormal_transform(v, kind, direction="forward", axis=-1):
    """Apply the orthonormal transform F (or its adjoint) along ``axis``.

    DCT uses the orthonormal DCT-II as forward map and DCT-III as adjoint.
    The Hadamard matrix is symmetric, so both directions coincide; it needs
    a power-of-two length.
    """
    v = np.asarray(v, dtype=np.float64)
    n = v.shape[axis]
    if n < 1:
        raise DimensionError("transform length must be positive")
    if direction not in ("forward", "adjoint"):
        raise ValueError(f"direction must be 'forward' or 'adjoint', got {direction!r}")
    if kind is Transform.DCT:
        if direction == "forward":
            return sfft.dct(v, type=2, norm="ortho", axis=axis)
        return sfft.idct(v, type=2, norm="ortho", axis=axis)
    if kind is Transform.HADAMARD:
        if not _is_power_of_two(n):
            raise DimensionError(f"Hadamard transform needs a power-of-two length, got {n}")
        return _fwht(v, axis)
    raise ValueError(f"unknown transform {kind!r}")


# ----------------------------------------------------------------- operators

@dataclass(frozen=True)
class HashBlock:
    offset: int
    size: int
    buckets: np.ndarray
    signs: np.ndarray


@dataclass(frozen=True, eq=False)
class SketchOperator:
    kind: SketchKind
    ambient_dim: int
    sketch_dim: int
    seed: int
    normals: Optional[np.ndarray] = field(default=None, repr=False)
    signs: Optional[np.ndarray] = field(default=None, repr=False)
    perm: Optional[np.ndarray] = field(default=None, repr=False)
    blocks: Tuple[HashBlock, ...] = field(default=(), repr=False)
    rng_state: dict = field(default=None, repr=False)

    @property
    def indices(self):
        """Sampled coordinates of an SRTT operator (distinct, in draw order)."""
        if not isinstance(self.kind, SRTT):
            raise AttributeError("only SRTT operators sample coordinates")
        return self.perm[: self.sketch_dim]

    @property
    def scale(self):
        """Per-output scale factors applied on top of the unscaled randomness."""
        r = self.sketch_dim
        if isinstance(self.kind, Gaussian):
            return np.full(r, 1.0 / np.sqrt(r))
        if isinstance(self.kind, SRTT):
            return np.full(r, np.sqrt(self.ambient_dim / r))
        out = np.empty(r)
        for blk in self.blocks:
            out[blk.offset: blk.offset + blk.size] = np.sqrt(blk.size / r)
        return out

    def gaussian_block(self, start=0, stop=None):
        """Unscaled standard normal columns ``start:stop`` (n x (stop-start))."""
        if not isinstance(self.kind, Gaussian):
            raise AttributeError("only Gaussian operators carry normal draws")
        stop = self.sketch_dim if stop is None else stop
        if self.normals is not None:
            return self.normals[:, start:stop]
        n = self.ambient_dim
        rng = _generator(self.seed)
        if start:
            for lo in range(0, start, 256):
                rng.standard_normal((min(256, start - lo), n))
        return np.asfortranarray(rng.standard_normal((stop - start, n)).T)

    def hash_matrix(self):
        """Sparse unscaled hash matrix H (ambient x sketch) of an HRTT operator."""
        if not isinstance(self.kind, HRTT):
            raise AttributeError("only HRTT operators hash")
        n = self.ambient_dim
        rows = np.tile(np.arange(n), len(self.blocks))
        cols = np.concatenate([blk.offset + blk.buckets for blk in self.blocks])
        vals = np.concatenate([blk.signs for blk in self.blocks])
        return sp.csc_matrix((vals, (rows, cols)), shape=(n, self.sketch_dim))


def _frozen(arr):
    arr.setflags(write=False)
    return arr


def _draw_signs(rng, n):
    return _frozen(rng.integers(0, 2, size=n).astype(np.float64) * 2.0 - 1.0)


def _fisher_yates(rng, perm, start, stop):
    n = perm.size
    for i in range(start, stop):
        j = int(rng.integers(i, n))
        perm[i], perm[j] = perm[j], perm[i]


def _hash_block(rng, n, offset, size):
    buckets = _frozen(rng.integers(0, size, size=n))
    signs = _draw_signs(rng, n)
    return HashBlock(offset, size, buckets, signs)


def build_sketch(kind, ambient_dim, sketch_dim, seed):
    """Realize a random embedding of the given kind from ``seed``."""
    n, r = int(ambient_dim), int(sketch_dim)
    if not 1 <= r <= n:
        raise DimensionError(f"need 1 <= sketch_dim <= ambient_dim, got r={r}, n={n}")
    seed = int(seed) & SEED_MASK
    rng = _generator(seed)
    if isinstance(kind, Gaussian):
        normals = None
        if n * r <= GAUSSIAN_STORE_LIMIT:
            normals = _frozen(np.asfortranarray(rng.standard_normal((r, n)).T))
        else:
            rng = None
        return SketchOperator(kind, n, r, seed, normals=normals,
                              rng_state=None if rng is None else rng.bit_generator.state)
    if not isinstance(kind, (SRTT, HRTT)):
        raise ConfigError(f"unknown sketch kind {kind!r}")
    if kind.transform is Transform.HADAMARD and not _is_power_of_two(n):
        raise DimensionError(f"Hadamard sketches need a power-of-two dimension, got {n}")
    signs = _draw_signs(rng, n)
    if isinstance(kind, SRTT):
        perm = np.arange(n)
        _fisher_yates(rng, perm, 0, r)
        return SketchOperator(kind, n, r, seed, signs=signs, perm=perm,
                              rng_state=rng.bit_generator.state)
    block = _hash_block(rng, n, 0, r)
    return SketchOperator(kind, n, r, seed, signs=signs, blocks=(block,),
                          rng_state=rng.bit_generator.state)


def extend_sketch(x, new_sketch_dim):
    """Grow an operator to ``new_sketch_dim`` outputs, keeping the old draws.

    Gaussian operators append fresh normal columns, SRTT operators continue
    the partial Fisher-Yates shuffle (so new indices are disjoint from the
    old ones) and HRTT operators append an independent hash block. Scale
    factors are recomputed for the new size at application time.
    """
    new_r = int(new_sketch_dim)
    old_r = x.sketch_dim
    n = x.ambient_dim
    if new_r <= old_r:
        raise DimensionError(f"new sketch dim {new_r} must exceed current {old_r}")
    if isinstance(x.kind, Gaussian):
        if new_r > n:
            raise DimensionError(f"sketch dim {new_r} exceeds ambient dim {n}")
        if x.normals is None or n * new_r > GAUSSIAN_STORE_LIMIT:
            return replace(x, sketch_dim=new_r, normals=None, rng_state=None)
        rng = _resume(x.rng_state)
        extra = rng.standard_normal((new_r - old_r, n)).T
        normals = _frozen(np.asfortranarray(np.hstack([x.normals, extra])))
        return replace(x, sketch_dim=new_r, normals=normals, rng_state=rng.bit_generator.state)
    rng = _resume(x.rng_state)
    if isinstance(x.kind, SRTT):
        if new_r > n:
            raise DimensionError(f"SRTT sample space exhausted: {new_r} > {n}")
        perm = x.perm.copy()
        _fisher_yates(rng, perm, old_r, new_r)
        return replace(x, sketch_dim=new_r, perm=perm, rng_state=rng.bit_generator.state)
    if new_r > n:
        raise DimensionError(f"sketch dim {new_r} exceeds ambient dim {n}")
    block = _hash_block(rng, n, old_r, new_r - old_r)
    return replace(x, sketch_dim=new_r, blocks=x.blocks + (block,),
                   rng_state=rng.bit_generator.state)


# --------------------------------------------------------------- application
#
# Application is split in two stages so that callers growing a sketch can
# reuse work: ``mix_*`` applies D and F (the expensive O(mn log n) part) and
# ``*_unscaled`` extracts a range of unscaled outputs from the mixed matrix.

def mix_right(a, x):
    """``A D F`` for trigonometric operators; ``A`` itself for Gaussian."""
    if isinstance(x.kind, Gaussian):
        return a
    return orthonormal_transform(a * x.signs[None, :], x.kind.transform, axis=1)


def mix_left(b, y):
    """``F D B`` for trigonometric operators; ``B`` itself for Gaussian."""
    if isinstance(y.kind, Gaussian):
        return b
    return orthonormal_transform(b * y.signs[:, None], y.kind.transform, axis=0)


def right_unscaled(mixed, x, start=0, stop=None):
    """Unscaled sketch columns ``start:stop`` from the output of :func:`mix_right`."""
    stop = x.sketch_dim if stop is None else stop
    if isinstance(x.kind, Gaussian):
        return mixed @ x.gaussian_block(start, stop)
    if isinstance(x.kind, SRTT):
        return mixed[:, x.perm[start:stop]]
    h = x.hash_matrix()[:, start:stop]
    return np.asarray((h.T @ mixed.T).T)


def left_unscaled(mixed, y, start=0, stop=None):
    """Unscaled sketch rows ``start:stop`` from the output of :func:`mix_left`."""
    stop = y.sketch_dim if stop is None else stop
    if isinstance(y.kind, Gaussian):
        return y.gaussian_block(start, stop).T @ mixed
    if isinstance(y.kind, SRTT):
        return mixed[y.perm[start:stop], :]
    h = y.hash_matrix()[:, start:stop]
    return np.asarray(h.T @ mixed)


def apply_right(a, x):
    """``A @ X`` for an n x r right sketch ``x``; returns an m x r array."""
    a = as_dense(a)
    if a.shape[1] != x.ambient_dim:
        raise DimensionError(f"matrix has {a.shape[1]} columns, sketch expects {x.ambient_dim}")
    out = right_unscaled(mix_right(a, x), x) * x.scale[None, :]
    return np.asfortranarray(out)


def apply_left(y, b):
    """``Y @ B`` for an r x m left sketch ``y``; returns an r x k array."""
    b = as_dense(b)
    if b.shape[0] != y.ambient_dim:
        raise DimensionError(f"matrix has {b.shape[0]} rows, sketch expects {y.ambient_dim}")
    out = left_unscaled(mix_left(b, y), y) * y.scale[:, None]
    return np.asfortranarray(out)


class TwoSidedSketch:
    """Incrementally maintained ``Y A X`` for a fixed matrix ``A``.

    Keeps ``A D F`` (right mixing), the unscaled ``A X`` and its left-mixed
    image ``F D (A X)``. Growing either operator only computes the new
    columns of ``A X`` and re-selects rows; nothing already mixed is redone.
    """

    def __init__(self, a, right, left):
        self.a = as_dense(a)
        m, n = self.a.shape
        if right.ambient_dim != n or left.ambient_dim != m:
            raise DimensionError("sketch dimensions do not match the matrix")
        self.right = right
        self.left = left
        self._mixed_a = mix_right(self.a, right)
        self._ax = np.asfortranarray(right_unscaled(self._mixed_a, right))
        self._ax_mixed = np.asfortranarray(mix_left(self._ax, left))

    def grow(self, right_dim=None, left_dim=None):
        if right_dim is not None and right_dim > self.right.sketch_dim:
            old = self.right.sketch_dim
            self.right = extend_sketch(self.right, right_dim)
            new_cols = right_unscaled(self._mixed_a, self.right, old, right_dim)
            self._ax = np.asfortranarray(np.hstack([self._ax, new_cols]))
            self._ax_mixed = np.asfortranarray(
                np.hstack([self._ax_mixed, mix_left(new_cols, self.left)]))
        if left_dim is not None and left_dim > self.left.sketch_dim:
            self.left = extend_sketch(self.left, left_dim)

    def ax(self, ncols=None):
        """Scaled ``A X`` (optionally only its first ``ncols`` columns)."""
        ncols = self.right.sketch_dim if ncols is None else ncols
        return self._ax[:, :ncols] * self.right.scale[None, :ncols]

    def sketch(self):
        """Scaled ``Y A X``, r2 x r."""
        rows = left_unscaled(self._ax_mixed, self.left)
        return np.asfortranarray(rows * self.left.scale[:, None] * self.right.scale[None, :])
