"""Synthetic test matrices with closed-form singular value profiles.

Families (all with sigma_1 = 1)::

    sp   sigma_i = i^-1
    fp   sigma_i = i^-3
    se   sigma_i = 10^(-0.01 (i-1))
    fe   sigma_i = 10^(-0.5 (i-1))
    gap  1 (x100), 1e-4 (x100), 1e-8 (x100), 1e-12 (x100), then 1e-16

Matrices are ``U diag(sigma) V^T`` with Haar-distributed orthonormal
factors (incoherent), or just ``diag(sigma)`` (maximally coherent).
Exponential profiles evaluated far out underflow to exactly zero.
"""
import enum
from dataclasses import dataclass
from typing import Tuple

import numpy as np

from .errors import ConfigError, DimensionError

MEMORY_BUDGET_BYTES = 4 * 1024**3


@dataclass(frozen=True)
class PolyDecay:
    p: float


@dataclass(frozen=True)
class ExpDecay:
    q: float


@dataclass(frozen=True)
class Steps:
    levels: Tuple[Tuple[float, int], ...]
    tail_value: float


class FactorKind(enum.Enum):
    HAAR_INCOHERENT = "haar"
    COHERENT_DIAGONAL = "diagonal"


GAP_SPECTRUM = Steps(((1.0, 100), (1e-4, 100), (1e-8, 100), (1e-12, 100)), 1e-16)

FAMILIES = {
    "sp": PolyDecay(1.0),
    "fp": PolyDecay(3.0),
    "se": ExpDecay(0.01),
    "fe": ExpDecay(0.5),
    "gap": GAP_SPECTRUM,
}


def _check_spec(spec):
    if isinstance(spec, PolyDecay):
        if not spec.p >= 0:
            raise ConfigError("PolyDecay exponent must be nonnegative")
    elif isinstance(spec, ExpDecay):
        if not spec.q >= 0:
            raise ConfigError("ExpDecay rate must be nonnegative")
    elif isinstance(spec, Steps):
        values = [v for v, _ in spec.levels]
        if not spec.levels or any(c < 1 for _, c in spec.levels):
            raise ConfigError("Steps needs at least one level with positive counts")
        if any(v <= 0 for v in values) or spec.tail_value <= 0:
            raise ConfigError("Steps values must be positive")
        if any(b >= a for a, b in zip(values, values[1:])) or spec.tail_value > values[-1]:
            raise ConfigError("Steps levels must be strictly decreasing")
    else:
        raise ConfigError(f"unknown spectrum spec {spec!r}")


def spectrum(spec, n):
    """The first ``n`` singular values of ``spec``."""
    if n < 1:
        raise DimensionError("n must be positive")
    _check_spec(spec)
    i = np.arange(1, n + 1, dtype=np.float64)
    if isinstance(spec, PolyDecay):
        return i ** -spec.p
    if isinstance(spec, ExpDecay):
        return 10.0 ** (-spec.q * (i - 1))
    out = np.full(n, spec.tail_value, dtype=np.float64)
    pos = 0
    for value, count in spec.levels:
        out[pos: pos + count] = value
        pos += count
        if pos >= n:
            break
    return out


def true_eps_rank(spec, n, eps):
    """Closed-form epsilon-rank: number of singular values strictly above ``eps``."""
    return int(np.count_nonzero(spectrum(spec, n) > eps))


def haar_orthonormal(rows, cols, rng):
    """Orthonormal factor of a Gaussian matrix, sign-fixed to be Haar distributed."""
    q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
    d = np.sign(np.diag(r))
    d[d == 0] = 1.0
    return q * d[None, :]


def make_test_matrix(m, n, spec, factors=FactorKind.HAAR_INCOHERENT, seed=0, return_factors=False):
    """Dense m x n matrix with singular values ``spectrum(spec, n)``.

    With ``return_factors=True`` also returns ``(U, sigma, V)``.
    """
    if m < n:
        raise DimensionError(f"need m >= n, got {m}x{n}")
    if n < 1:
        raise DimensionError("n must be positive")
    need = 8 * (m * n + (m * n + n * n if factors is FactorKind.HAAR_INCOHERENT else 0))
    if need > MEMORY_BUDGET_BYTES:
        raise MemoryError(f"a {m}x{n} test matrix needs about {need / 2**30:.1f} GiB")
    sigma = spectrum(spec, n)
    if factors is FactorKind.COHERENT_DIAGONAL:
        a = np.zeros((m, n), order="F")
        a[np.arange(n), np.arange(n)] = sigma
        u = np.eye(m, n)
        v = np.eye(n)
    elif factors is FactorKind.HAAR_INCOHERENT:
        rng = np.random.Generator(np.random.Philox(int(seed) & ((1 << 64) - 1)))
        u = haar_orthonormal(m, n, rng)
        v = haar_orthonormal(n, n, rng)
        a = np.asfortranarray((u * sigma[None, :]) @ v.T)
    else:
        raise ConfigError(f"unknown factor kind {factors!r}")
    if return_factors:
        return a, (u, sigma, v)
    return a
