"""Numerical rank estimation from a two-sided sketch ``Y A X``.

The estimator draws an oversampled right sketch ``X`` (n x r1~), compresses
``A X`` once more from the left with ``Y`` (r2 x m), and counts how many of
the leading ``r1`` singular values of ``Y A X`` exceed ``eps``. Trailing
oversampling estimates are computed and reported but never thresholded.
When every estimate is above ``eps`` the cap ``r1`` was too small; the
adaptive variant doubles it and grows both sketches in place.
"""
import enum
import math
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import as_dense, qr_diag_estimates, singular_values
from .sketch import SRTT, SketchKind, TwoSidedSketch, build_sketch, derive_seed

SV_METHODS = ("full-svd", "qr-diag")


class Status(str, enum.Enum):
    CONVERGED = "Converged"
    HIT_CAP = "HitCap"


@dataclass(frozen=True)
class RankEstimateConfig:
    eps: float
    r1: int
    oversample_frac: float = 0.10
    r2_factor: float = 2.0
    right_kind: SketchKind = SRTT()
    left_kind: SketchKind = SRTT()
    sv_method: str = "full-svd"
    seed: int = 0
    max_doublings: int = 6

    def __post_init__(self):
        if not (math.isfinite(self.eps) and self.eps > 0):
            raise ConfigError(f"eps must be positive and finite, got {self.eps}")
        if int(self.r1) != self.r1 or self.r1 < 1:
            raise ConfigError(f"r1 must be a positive integer, got {self.r1}")
        if self.oversample_frac < 0:
            raise ConfigError("oversample_frac must be nonnegative")
        if self.r2_factor < 1:
            raise ConfigError("r2_factor must be at least 1")
        if self.sv_method not in SV_METHODS:
            raise ConfigError(f"sv_method must be one of {SV_METHODS}, got {self.sv_method!r}")
        if self.max_doublings < 0:
            raise ConfigError("max_doublings must be nonnegative")

    def oversampled(self, r1=None):
        """Right sketch size ``round(1.1 r1)``, rounded half up, at least ``r1 + 1``."""
        r1 = self.r1 if r1 is None else r1
        r = math.floor(r1 * (1.0 + self.oversample_frac) + 0.5 + 1e-9)
        if self.oversample_frac > 0:
            r = max(r, r1 + 1)
        return r

    def left_dim(self, right_dim, m):
        return min(m, math.ceil(self.r2_factor * right_dim - 1e-9))

    def check_dims(self, m, n):
        rt = self.oversampled()
        if rt > min(m, n):
            raise ConfigError(
                f"oversampled sketch size {rt} exceeds min(m, n) = {min(m, n)}")


@dataclass
class RankReport:
    r_hat: int
    sv_estimates: np.ndarray
    rounds: List[Tuple[int, int, int]]
    status: Status
    seed: int
    sv_oversampled: np.ndarray = field(default=None, repr=False)

    def to_dict(self):
        return {
            "r_hat": int(self.r_hat),
            "sv_estimates": [float(v) for v in self.sv_estimates],
            "sv_oversampled": [float(v) for v in self.sv_oversampled],
            "rounds": [{"r1": a, "r1_tilde": b, "r2": c} for a, b, c in self.rounds],
            "status": self.status.value,
            "seed": int(self.seed),
        }


def count_above_threshold(sv, eps):
    """Number of values strictly greater than ``eps``."""
    return int(np.count_nonzero(np.asarray(sv, dtype=np.float64) > eps))


def gn_free_rank(r_factor, eps):
    """Rank estimate from the triangular factor of a QR of ``Y A X``.

    Generalized Nystrom already factors ``Y A X = Q R`` to apply its
    pseudoinverse, so counting ``|diag(R)| > eps`` costs O(r) extra work.
    """
    r = np.asarray(r_factor, dtype=np.float64)
    if r.ndim != 2:
        raise DimensionError("R factor must be 2-D")
    if np.any(np.tril(r, -1) != 0):
        raise ValueError("R factor must be upper triangular")
    return count_above_threshold(np.abs(np.diag(r)), eps)


def sketch_estimates(t, method):
    """Singular value estimates of the small sketch ``t`` by ``method``."""
    if method == "full-svd":
        return singular_values(t)
    return qr_diag_estimates(t)


def start_sketch(a, cfg):
    """Draw both operators for the first round and form the sketch state."""
    m, n = a.shape
    cfg.check_dims(m, n)
    rt = cfg.oversampled()
    r2 = cfg.left_dim(rt, m)
    right = build_sketch(cfg.right_kind, n, rt, derive_seed(cfg.seed, "right"))
    left = build_sketch(cfg.left_kind, m, r2, derive_seed(cfg.seed, "left"))
    return TwoSidedSketch(a, right, left)


def next_cap(cfg, r1, m, n):
    """Doubled cap, clipped so the oversampled sketch still fits; ``None`` if stuck."""
    limit = min(m, n)
    new = 2 * r1
    while new > r1 and cfg.oversampled(new) > limit:
        new -= 1
    return new if new > r1 else None


def _run(a, cfg, max_doublings):
    a = as_dense(a)
    m, n = a.shape
    state = start_sketch(a, cfg)
    r1 = cfg.r1
    rounds = []
    for attempt in range(max_doublings + 1):
        rounds.append((r1, state.right.sketch_dim, state.left.sketch_dim))
        sv_all = sketch_estimates(state.sketch(), cfg.sv_method)
        sv = sv_all[:r1]
        r_hat = count_above_threshold(sv, cfg.eps)
        status = Status.CONVERGED if r_hat < r1 else Status.HIT_CAP
        if status is Status.CONVERGED or attempt == max_doublings:
            break
        new_r1 = next_cap(cfg, r1, m, n)
        if new_r1 is None:
            break
        rt = cfg.oversampled(new_r1)
        state.grow(right_dim=rt, left_dim=cfg.left_dim(rt, m))
        r1 = new_r1
    return RankReport(r_hat, sv, rounds, status, cfg.seed, sv_oversampled=sv_all)


def estimate_rank(a, cfg):
    """One pass of the two-sided sketch estimator.

    Returns ``status=HitCap`` with ``r_hat = r1`` when all leading ``r1``
    estimates exceed ``eps``.
    """
    return _run(a, cfg, 0)


def estimate_rank_adaptive(a, cfg):
    """Like :func:`estimate_rank` but doubles ``r1`` on ``HitCap``.

    Up to ``cfg.max_doublings`` restarts; each one appends columns to ``X``
    and rows to ``Y`` instead of redrawing them.
    """
    return _run(a, cfg, cfg.max_doublings)
