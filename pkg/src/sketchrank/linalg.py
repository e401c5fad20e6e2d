"""Dense kernels: thin QR, singular values, norms and coherence.

Matrices are plain ``numpy`` float64 arrays. :func:`as_dense` is the single
entry point that validates an operand (2-D, nonempty, finite) and returns it
in column-major (Fortran) order; every other routine calls it first.
"""
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import DimensionError

ORTHONORMAL_TOL = 1e-8


class QRFactors(NamedTuple):
    q: np.ndarray
    r: np.ndarray


def as_dense(a, name="matrix"):
    """Validate ``a`` and return it as a column-major float64 array."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DimensionError(f"{name} must be nonempty, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains NaN or Inf entries")
    return np.asfortranarray(arr)


def qr_thin(a):
    """Thin Householder QR of a tall matrix.

    Returns ``QRFactors(q, r)`` with ``q`` of shape (m, k) having orthonormal
    columns and ``r`` (k, k) upper triangular, k = a.shape[1].
    """
    a = as_dense(a)
    m, k = a.shape
    if m < k:
        raise DimensionError(f"qr_thin needs rows >= cols, got {m}x{k}")
    q, r = np.linalg.qr(a, mode="reduced")
    return QRFactors(np.asfortranarray(q), np.triu(r))


def qr_pivoted(a):
    """Thin QR with column pivoting: ``a[:, perm] = q @ r``.

    ``|diag(r)|`` is nonincreasing, which makes it usable as a cheap
    singular value surrogate.
    """
    a = as_dense(a)
    m, k = a.shape
    if m < k:
        raise DimensionError(f"qr_pivoted needs rows >= cols, got {m}x{k}")
    q, r, perm = sla.qr(a, mode="economic", pivoting=True)
    return QRFactors(np.asfortranarray(q), np.triu(r)), perm


def singular_values(a, method="lapack"):
    """All ``min(m, n)`` singular values of ``a`` in nonincreasing order.

    ``method="lapack"`` calls the divide-and-conquer driver; ``"jacobi"``
    runs :func:`jacobi_singular_values`, which is slower but independent of
    LAPACK's bidiagonalization.
    """
    a = as_dense(a)
    if method == "lapack":
        s = sla.svdvals(a, check_finite=False)
    elif method == "jacobi":
        s = jacobi_singular_values(a)
    else:
        raise ValueError(f"unknown singular value method {method!r}")
    return _sorted_desc(s)


def _round_robin(n):
    """Pairings of a round-robin tournament on ``n`` (even) players."""
    players = list(range(n))
    rounds = []
    for _ in range(n - 1):
        half = n // 2
        rounds.append((np.array(players[:half]), np.array(players[half:][::-1])))
        players = [players[0]] + [players[-1]] + players[1:-1]
    return rounds


def jacobi_singular_values(a, tol=1e-15, max_sweeps=80):
    """One-sided (Hestenes) Jacobi on the triangular factor of ``a``.

    Each round of the round-robin ordering rotates ``n/2`` disjoint column
    pairs at once. Stops when a full sweep performs no rotation.
    """
    a = as_dense(a)
    if a.shape[0] < a.shape[1]:
        a = a.T
    w = np.array(qr_thin(a).r, order="F")
    n = w.shape[1]
    if n == 1:
        return np.array([np.linalg.norm(w[:, 0])])
    if n % 2:
        w = np.hstack([w, np.zeros((w.shape[0], 1))])
    rounds = _round_robin(w.shape[1])
    for _ in range(max_sweeps):
        rotated = False
        for left, right in rounds:
            x = w[:, left]
            y = w[:, right]
            alpha = np.einsum("ij,ij->j", x, x)
            beta = np.einsum("ij,ij->j", y, y)
            gamma = np.einsum("ij,ij->j", x, y)
            active = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not np.any(active):
                continue
            rotated = True
            g = np.where(active, gamma, 1.0)
            # a near-zero column can push zeta to inf, which correctly gives t = 0
            with np.errstate(over="ignore"):
                zeta = (beta - alpha) / (2.0 * g)
            t = np.where(zeta >= 0, 1.0, -1.0) / (np.abs(zeta) + np.hypot(1.0, zeta))
            c = np.where(active, 1.0 / np.sqrt(1.0 + t * t), 1.0)
            s = np.where(active, c * t, 0.0)
            w[:, left] = c * x - s * y
            w[:, right] = s * x + c * y
        if not rotated:
            break
    s = np.linalg.norm(w, axis=0)[:n]
    return _sorted_desc(s)


def qr_diag_estimates(a):
    """Singular value estimates ``|diag(R)|`` from a column-pivoted QR."""
    a = as_dense(a)
    factors, _ = qr_pivoted(a)
    return _sorted_desc(np.abs(np.diag(factors.r)))


def coherence(u):
    """Largest squared row norm of a matrix with orthonormal columns."""
    u = as_dense(u)
    m, k = u.shape
    if k > m:
        raise DimensionError("coherence needs at most as many columns as rows")
    gram = u.T @ u
    if np.max(np.abs(gram - np.eye(k))) > ORTHONORMAL_TOL:
        raise ValueError("coherence requires orthonormal columns")
    return float(np.max(np.einsum("ij,ij->i", u, u)))


def frobenius_norm(a):
    return float(np.linalg.norm(as_dense(a), "fro"))


def spectral_norm(a):
    return float(singular_values(a)[0])


def _sorted_desc(s):
    s = np.sort(np.asarray(s, dtype=np.float64))[::-1]
    return np.ascontiguousarray(s)
