"""Randomized rangefinder and its fixed-precision driver.

:func:`re_rangefinder` first runs the rank estimator to get singular value
estimates, picks the smallest target rank whose a-priori Frobenius error
bound ``sqrt(1 + r/(p-1)) * sqrt(sum_{j>r} s_j^2)`` is below ``eps``, and
then orthonormalizes the first ``r + p`` columns of the sketch it already
holds.
"""
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DimensionError
from .linalg import as_dense, qr_thin
from .rank import (RankEstimateConfig, RankReport, Status, count_above_threshold,
                   next_cap, sketch_estimates, start_sketch)
from .sketch import SRTT, Gaussian, SketchKind, apply_right, build_sketch, derive_seed


@dataclass(frozen=True, eq=False)
class QBFactors:
    q: np.ndarray
    b: np.ndarray
    target_rank: int = None

    @property
    def rank(self):
        return self.q.shape[1]


@dataclass(frozen=True)
class FixedPrecisionConfig:
    eps: float
    r1: int
    p: int = 10
    seed: int = 0
    right_kind: SketchKind = SRTT()
    left_kind: SketchKind = SRTT()
    oversample_frac: float = 0.10
    r2_factor: float = 2.0
    sv_method: str = "full-svd"
    max_doublings: int = 6

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ConfigError(f"oversampling p must be an integer >= 2, got {self.p}")
        # the remaining checks live in RankEstimateConfig
        self.rank_config()

    def rank_config(self):
        return RankEstimateConfig(
            eps=self.eps, r1=self.r1, oversample_frac=self.oversample_frac,
            r2_factor=self.r2_factor, right_kind=self.right_kind, left_kind=self.left_kind,
            sv_method=self.sv_method, seed=self.seed, max_doublings=self.max_doublings)


def rangefinder_qb(a, r, p, kind=Gaussian(), seed=0):
    """Fixed-rank QB: sketch with ``r + p`` columns, orthonormalize, project."""
    a = as_dense(a)
    m, n = a.shape
    if r < 2 or p < 2:
        raise DimensionError(f"need r >= 2 and p >= 2, got r={r}, p={p}")
    if r + p > min(m, n):
        raise DimensionError(f"r + p = {r + p} exceeds min(m, n) = {min(m, n)}")
    x = build_sketch(kind, n, r + p, derive_seed(seed, "rangefinder"))
    q = qr_thin(apply_right(a, x)).q
    return QBFactors(q, q.T @ a, target_rank=r)


def error_bound(tail_sq, r, p):
    """Expected Frobenius error bound for target rank ``r`` and tail energy."""
    return np.sqrt(1.0 + r / (p - 1.0)) * np.sqrt(tail_sq)


def choose_rank_from_bound(sv_estimates, n, eps, p):
    """Smallest ``r`` whose estimated error bound is at most ``eps``.

    Estimates beyond the available ``r1`` are filled with the last one. The
    search runs over ``r = 0 .. min(r1, n)``; ``None`` means no admissible
    rank and the caller should enlarge ``r1``.
    """
    s = np.asarray(sv_estimates, dtype=np.float64)
    if s.size == 0:
        raise ValueError("need at least one singular value estimate")
    if p < 2:
        raise ValueError("p must be at least 2")
    r1 = min(s.size, n)
    s = s[:r1]
    fill_sq = (n - r1) * s[-1] ** 2
    # tail[r] = sum_{j > r} s_j^2 for r = 0..r1, summed from the small end
    head_tail = np.concatenate([np.cumsum((s ** 2)[::-1])[::-1], [0.0]])
    tail = head_tail + fill_sq
    ranks = np.arange(r1 + 1)
    ok = np.flatnonzero(error_bound(tail, ranks, p) <= eps)
    return int(ok[0]) if ok.size else None


def qb_error(a, qb):
    """``||A - Q B||_F`` evaluated densely."""
    a = as_dense(a)
    if qb.q.shape[0] != a.shape[0] or qb.b.shape[1] != a.shape[1]:
        raise DimensionError("QB factors do not match the matrix")
    return float(np.linalg.norm(a - qb.q @ qb.b, "fro"))


def re_rangefinder(a, cfg):
    """Fixed-precision QB with ``||A - QB||_F`` targeted at ``cfg.eps``.

    Returns ``(QBFactors, RankReport)``. The report's ``r_hat`` counts the
    estimates above ``eps``; the chosen target rank is ``qb.target_rank`` and
    ``qb.rank`` is ``target_rank + p`` unless clipped by the matrix size.
    """
    a = as_dense(a)
    m, n = a.shape
    rcfg = cfg.rank_config()
    state = start_sketch(a, rcfg)
    r1 = cfg.r1
    rounds = []
    target = None
    for attempt in range(cfg.max_doublings + 1):
        rounds.append((r1, state.right.sketch_dim, state.left.sketch_dim))
        sv_all = sketch_estimates(state.sketch(), cfg.sv_method)
        sv = sv_all[:r1]
        target = choose_rank_from_bound(sv, n, cfg.eps, cfg.p)
        if target is not None or attempt == cfg.max_doublings:
            break
        new_r1 = next_cap(rcfg, r1, m, n)
        if new_r1 is None:
            break
        rt = rcfg.oversampled(new_r1)
        state.grow(right_dim=rt, left_dim=rcfg.left_dim(rt, m))
        r1 = new_r1

    if target is None:
        status = Status.HIT_CAP
        k = state.right.sketch_dim
        target = max(2, k - cfg.p)
    else:
        status = Status.CONVERGED
        target = max(2, target)
        k = min(target + cfg.p, m, n)
        if k > state.right.sketch_dim:
            state.grow(right_dim=k)
    q = qr_thin(state.ax(k)).q
    qb = QBFactors(q, q.T @ a, target_rank=target)
    report = RankReport(count_above_threshold(sv, cfg.eps), sv, rounds, status, cfg.seed,
                        sv_oversampled=sv_all)
    return qb, report


def bound_rank_exact(sigma, eps, p):
    """Target rank the error-bound rule picks when handed the true spectrum."""
    sigma = np.asarray(sigma, dtype=np.float64)
    return choose_rank_from_bound(sigma, sigma.size, eps, p)

