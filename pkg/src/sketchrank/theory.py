"""Closed-form bounds on sketched singular values and Monte-Carlo checks of them.

Two kinds of functions live here:

* evaluators, pure formulas such as :func:`gauss_ratio_bounds` or
  :func:`srtt_required_samples`;
* checkers, which draw seeded random instances and count how often an
  inequality fails, returning a :class:`BoundCheckReport`.

Deterministic inequalities get a violation budget of zero. Probabilistic
ones get ``trials * p`` plus three binomial standard deviations. Trial ``k``
of a checker seeded with ``s`` uses seed ``s ^ k``, so every trial can be
reproduced on its own. Logarithms are natural.
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Dict, List

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ConfigError, DimensionError
from .linalg import as_dense, coherence, singular_values
from .sketch import (SRTT, Gaussian, Transform, apply_left, apply_right, build_sketch,
                     orthonormal_transform)
from .synthetic import spectrum

SANDWICH_RTOL = 1e-10


@dataclass
class BoundCheckReport:
    name: str
    trials: int
    violations: int
    per_index_margins: List[float]
    params: Dict = field(default_factory=dict)
    allowed: int = 0

    @property
    def passed(self):
        return self.violations <= self.allowed

    def to_dict(self):
        out = asdict(self)
        out["per_index_margins"] = [float(v) for v in self.per_index_margins]
        out["passed"] = self.passed
        return out


@dataclass(frozen=True)
class RatioBounds:
    lower: float
    upper: float
    index: int
    sketch_dim: int
    ambient: int
    tail_ratio: float
    t: float


def _seed(seed, trial):
    return (int(seed) ^ int(trial)) & ((1 << 64) - 1)


def _rng(seed, trial):
    return np.random.Generator(np.random.Philox(_seed(seed, trial)))


def binomial_allowance(trials, p):
    """Failures tolerated when each trial fails with probability at most ``p``."""
    p = min(max(float(p), 0.0), 1.0)
    return int(math.floor(trials * p + 3.0 * math.sqrt(trials * p * (1.0 - p))))


# ---------------------------------------------------------------- evaluators

def mp_expectation_bounds(m, n):
    """``(sqrt(m) - sqrt(n), sqrt(m) + sqrt(n))``: brackets for E sigma_min, E sigma_max."""
    if n < 1 or m < n:
        raise DimensionError(f"need m >= n >= 1, got m={m}, n={n}")
    return math.sqrt(m) - math.sqrt(n), math.sqrt(m) + math.sqrt(n)


def mp_tail_probability(t):
    """Bound ``exp(-t^2 / 2)`` on either edge deviating by more than ``t``."""
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    return math.exp(-t * t / 2.0)


def gauss_ratio_bounds(i, r, n, tail_ratio, t=0.0):
    """Bracket on ``sigma_i(AX) / sigma_i(A)`` for a Gaussian embedding ``X = G / sqrt(r)``.

    With ``t = 0`` the bracket is on the expectation; with ``t > 0`` it holds
    with failure probability at most ``3 exp(-t^2 / 2)``. ``tail_ratio`` is
    ``sigma_{r+1} / sigma_i``. The lower bound is returned even when it is
    not positive.
    """
    if not 1 <= i <= r <= n:
        raise DimensionError(f"need 1 <= i <= r <= n, got i={i}, r={r}, n={n}")
    if not 0 <= tail_ratio <= 1:
        raise ValueError(f"tail_ratio must lie in [0, 1], got {tail_ratio}")
    if not t >= 0:
        raise ValueError(f"t must be nonnegative, got {t}")
    dev = t / math.sqrt(r)
    lower = 1.0 - math.sqrt(i / r) - dev
    upper = (1.0 + math.sqrt((r - i + 1) / r) + tail_ratio * (1.0 + math.sqrt((n - r) / r))
             + dev * (1.0 + tail_ratio))
    return RatioBounds(lower, upper, i, r, n, float(tail_ratio), float(t))


def embed_ratio_bounds(eps, tail_over_sigma, x_norm):
    """Bracket on ``sigma_i(AX) / sigma_i(A)`` when X embeds the leading subspace with distortion ``eps``."""
    if not 0 <= eps < 1:
        raise ValueError(f"eps must lie in [0, 1), got {eps}")
    if tail_over_sigma < 0 or x_norm < 0:
        raise ValueError("tail ratio and norm must be nonnegative")
    return 1.0 - eps, math.sqrt((1.0 + eps) ** 2 + (tail_over_sigma * x_norm) ** 2)


def spiked_limit(sigma_i, noise, c):
    """Limit of ``sigma_i(AX)`` for a spike ``sigma_i`` over a flat noise floor, ``n / r -> c``."""
    if not noise > 0 or not c > 0:
        raise ValueError("noise and c must be positive")
    if sigma_i < noise:
        raise ValueError("spike must be at least the noise level")
    if sigma_i > noise * math.sqrt(1.0 + math.sqrt(c)):
        return sigma_i * math.sqrt(1.0 + c * noise ** 2 / (sigma_i ** 2 - noise ** 2))
    return noise * (1.0 + math.sqrt(c))


def srtt_required_samples(r1, m, eps, delta, eta):
    """Rows an SRTT left sketch needs for a distortion-``eps`` embedding of an r1-dim range.

    Returns ``None`` (infeasible) when the requirement exceeds ``m``.
    """
    if not 0 < eps < 1.0 / 3.0:
        raise ValueError(f"eps must lie in (0, 1/3), got {eps}")
    if not 0 < delta < 1:
        raise ValueError(f"delta must lie in (0, 1), got {delta}")
    if eta not in (1, 2):
        raise ValueError(f"eta must be 1 or 2, got {eta}")
    if not 1 <= r1 <= m:
        raise DimensionError(f"need 1 <= r1 <= m, got r1={r1}, m={m}")
    need = srtt_sample_requirement(r1, m, eps, delta, eta)
    need = math.ceil(need)
    return need if need <= m else None


def srtt_sample_requirement(r1, m, eps, delta, eta):
    """The real-valued sample requirement before rounding and the feasibility check."""
    root = math.sqrt(r1) + math.sqrt(8.0 * math.log(m / delta))
    return 6.0 * eta / eps ** 2 * root ** 2 * math.log(r1 / delta)


def mixing_coherence_bound(r, m, delta, eta):
    """Coherence of ``F D U`` for an m x r orthonormal ``U``, holding with probability ``1 - delta``."""
    if not 1 <= r <= m:
        raise DimensionError(f"need 1 <= r <= m, got r={r}, m={m}")
    if not 0 < delta <= 1:
        raise ValueError(f"delta must lie in (0, 1], got {delta}")
    if eta <= 0:
        raise ValueError("eta must be positive")
    return eta / m * (math.sqrt(r) + math.sqrt(8.0 * math.log(m / delta))) ** 2


# ------------------------------------------------------ deterministic checks

def _sandwich_quantities(a, g):
    a = as_dense(a, "a")
    g = as_dense(g, "g")
    m, n = a.shape
    r = g.shape[1]
    if m < n:
        raise DimensionError(f"need m >= n, got {m}x{n}")
    if g.shape[0] != n or r > n:
        raise DimensionError(f"g must be n x r with r <= n, got {g.shape} for n={n}")
    if n > 2000:
        raise DimensionError("full SVD checks are limited to n <= 2000")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    g1 = vt[:r] @ g
    g2 = vt[r:] @ g
    b1 = (u[:, :r] * s[:r]) @ g1
    tail = s[r] * (singular_values(g2)[0] if g2.shape[0] else 0.0) if r < n else 0.0
    sv_ag = singular_values(a @ g)
    sv_b1 = singular_values(b1)
    lo = np.array([singular_values(g1[:i])[-1] for i in range(1, r + 1)])
    hi = np.array([singular_values(g1[i - 1:])[0] for i in range(1, r + 1)])
    return s, sv_ag, sv_b1, lo, hi, tail, singular_values(g)[0]


def verify_deterministic_sandwich(a, g, rtol=SANDWICH_RTOL):
    """Check the deterministic two-sided bounds on ``sigma_i(AG) / sigma_i(A)``.

    For every ``i = 1..r`` this checks the outer sandwich
    ``smin(G1[:i]) <= sigma_i(AG)/sigma_i(A) <= sqrt(smax(G1[i-1:])^2 + (s_{r+1} smax(G2)/sigma_i)^2)``
    and the two intermediate sandwiches through ``B1 = U1 S1 G1``. All
    comparisons are done in product form with an absolute slack of
    ``rtol * sigma_1(A) * ||G||_2``. Margins are the smallest slack per
    index, divided by ``sigma_i(A)`` when that is nonzero.
    """
    s, sv_ag, sv_b1, lo, hi, tail, gnorm = _sandwich_quantities(a, g)
    r = sv_ag.size
    scale = max(s[0] * gnorm, np.finfo(float).tiny)
    tol = rtol * scale
    si = s[:r]
    slacks = np.vstack([
        sv_ag - lo * si,                                  # outer lower
        np.sqrt((hi * si) ** 2 + tail ** 2) - sv_ag,      # outer upper
        sv_ag - sv_b1,                                    # through B1, lower
        np.sqrt(sv_b1 ** 2 + tail ** 2) - sv_ag,          # through B1, upper
        sv_b1 - lo * si,                                  # B1 vs A, lower
        hi * si - sv_b1,                                  # B1 vs A, upper
    ])
    worst = slacks.min(axis=0)
    violations = int(np.count_nonzero(worst < -tol))
    margins = np.where(si > 0, worst / np.where(si > 0, si, 1.0), worst / scale)
    return BoundCheckReport("sandwich", r, violations, margins.tolist(),
                            {"m": a.shape[0], "n": a.shape[1], "r": r, "rtol": rtol})


def sandwich_trials(pairs=200, n=100, r=30, m=None, seed=0):
    """Deterministic bounds on ``pairs`` random (A, G) pairs with graded spectra."""
    m = n if m is None else m
    worst = np.full(r, np.inf)
    bad = 0
    for k in range(pairs):
        rng = _rng(seed, k)
        # geometric spectrum with a random decay rate, dense random factors
        decay = rng.uniform(0.0, 0.3)
        sigma = 10.0 ** (-decay * np.arange(n))
        u, _ = np.linalg.qr(rng.standard_normal((m, n)))
        v, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = (u * sigma) @ v.T
        g = rng.standard_normal((n, r))
        rep = verify_deterministic_sandwich(a, g)
        bad += rep.violations > 0
        worst = np.minimum(worst, rep.per_index_margins)
    return BoundCheckReport("sandwich", pairs, bad, worst.tolist(),
                            {"pairs": pairs, "m": m, "n": n, "r": r, "seed": seed})


# ---------------------------------------------------------- Gaussian checks

def check_mp_expectation(m=400, n=100, trials=500, seed=0):
    """Sample means of the extreme singular values against their brackets.

    A violation is a mean beyond its bracket by more than three standard
    errors. Margins are ``(mean sigma_min - lower, upper - mean sigma_max)``.
    """
    lower, upper = mp_expectation_bounds(m, n)
    smin = np.empty(trials)
    smax = np.empty(trials)
    for k in range(trials):
        s = singular_values(_rng(seed, k).standard_normal((m, n)))
        smin[k], smax[k] = s[-1], s[0]
    se = lambda x: x.std(ddof=1) / math.sqrt(trials) if trials > 1 else 0.0
    margins = [smin.mean() - lower, upper - smax.mean()]
    violations = int(margins[0] < -3 * se(smin)) + int(margins[1] < -3 * se(smax))
    return BoundCheckReport("mp-expectation", trials, violations, margins,
                            {"m": m, "n": n, "seed": seed, "mean_min": float(smin.mean()),
                             "mean_max": float(smax.mean())})


def check_mp_tail(m=400, n=100, t=4.0, trials=10_000, seed=0):
    """Frequency of either extreme singular value leaving the widened support.

    Each edge may fail with probability ``exp(-t^2/2)``, so the per-draw
    budget is twice that.
    """
    lower, upper = mp_expectation_bounds(m, n)
    p = 2.0 * mp_tail_probability(t)
    bad = 0
    lo_margin = np.inf
    hi_margin = np.inf
    for k in range(trials):
        s = singular_values(_rng(seed, k).standard_normal((m, n)))
        lo_margin = min(lo_margin, s[-1] - (lower - t))
        hi_margin = min(hi_margin, (upper + t) - s[0])
        bad += s[-1] < lower - t or s[0] > upper + t
    return BoundCheckReport("mp-tail", trials, int(bad), [lo_margin, hi_margin],
                            {"m": m, "n": n, "t": t, "seed": seed, "p": p},
                            allowed=binomial_allowance(trials, p))


def sketched_ratios(a, kind, r, trials, seed=0):
    """``sigma_i(AX) / sigma_i(A)`` for ``trials`` independent sketches, shape (trials, r)."""
    a = as_dense(a)
    sigma = singular_values(a)[:r]
    out = np.empty((trials, r))
    for k in range(trials):
        x = build_sketch(kind, a.shape[1], r, _seed(seed, k))
        out[k] = singular_values(apply_right(a, x))[:r] / sigma
    return out


def check_gauss_ratio(a, r, trials=500, max_index=None, seed=0):
    """Monte-Carlo mean of ``sigma_i(AX) / sigma_i(A)`` against the t = 0 brackets.

    An index violates when its mean lies outside the bracket by more than
    three standard errors. Margins are the signed distance of the mean to
    the nearer bracket end.
    """
    a = as_dense(a)
    n = a.shape[1]
    max_index = r if max_index is None else max_index
    sigma = singular_values(a)
    ratios = sketched_ratios(a, Gaussian(), r, trials, seed)
    mean = ratios.mean(axis=0)
    se = ratios.std(axis=0, ddof=1) / math.sqrt(trials) if trials > 1 else np.zeros(r)
    tail = sigma[r] if r < sigma.size else 0.0
    margins = []
    bad = 0
    for i in range(1, max_index + 1):
        b = gauss_ratio_bounds(i, r, n, min(1.0, tail / sigma[i - 1]), 0.0)
        margin = min(mean[i - 1] - b.lower, b.upper - mean[i - 1])
        margins.append(margin)
        bad += margin < -3.0 * se[i - 1]
    return BoundCheckReport("gauss-ratio", trials, int(bad), margins,
                            {"n": n, "r": r, "max_index": max_index, "seed": seed,
                             "mean_ratio": mean[:max_index].tolist()})


def check_embedding_bounds(a, r, leading, kind=SRTT(), trials=100, seed=0):
    """Ratios for a general embedding against brackets built from measured distortion.

    Per trial the distortion ``eps = max |sigma_j(V1^T X) - 1|`` of the
    leading ``leading`` right singular vectors is measured, then every
    ``i <= leading`` is checked. Trials with ``eps >= 1`` give no bracket
    and are skipped. The budget allows 1% of (trial, index) pairs to fail.
    """
    a = as_dense(a)
    n = a.shape[1]
    if not 1 <= leading <= r <= n:
        raise DimensionError("need 1 <= leading <= r <= n")
    _, sigma, vt = np.linalg.svd(a, full_matrices=False)
    v1 = vt[:leading].T
    tail = sigma[leading] if leading < sigma.size else 0.0
    eye = np.eye(n)
    checked = 0
    bad = 0
    worst = np.full(leading, np.inf)
    for k in range(trials):
        x = build_sketch(kind, n, r, _seed(seed, k))
        xmat = apply_right(eye, x)
        eps = float(np.max(np.abs(singular_values(v1.T @ xmat) - 1.0)))
        if eps >= 1.0:
            continue
        xnorm = singular_values(xmat)[0]
        ratio = singular_values(a @ xmat)[:leading] / sigma[:leading]
        for i in range(leading):
            lo, hi = embed_ratio_bounds(eps, tail / sigma[i], xnorm)
            margin = min(ratio[i] - lo, hi - ratio[i])
            worst[i] = min(worst[i], margin)
            checked += 1
            bad += margin < -SANDWICH_RTOL
    worst = np.where(np.isfinite(worst), worst, 0.0)
    return BoundCheckReport("embedding", checked, int(bad), worst.tolist(),
                            {"n": n, "r": r, "leading": leading, "seed": seed, "trials": trials},
                            allowed=int(0.01 * checked))


# ------------------------------------------------------------ SRTT checks

def check_approx_orthogonalization(b, r2, kind=SRTT(), trials=10, seed=0, tol=0.5):
    """Relative error of ``sigma_i(YB)`` against ``sigma_i(B)`` for a left sketch ``Y``.

    A trial fails when ``max_i |sigma_i(YB) - sigma_i(B)| / sigma_i(B) >= tol``.
    Margins are ``tol`` minus each trial's worst relative error.
    """
    b = as_dense(b)
    sigma = singular_values(b)
    margins = []
    bad = 0
    for k in range(trials):
        y = build_sketch(kind, b.shape[0], r2, _seed(seed, k))
        est = singular_values(apply_left(y, b))
        err = float(np.max(np.abs(est - sigma) / sigma))
        margins.append(tol - err)
        bad += err >= tol
    return BoundCheckReport("approx-orthogonalization", trials, int(bad), margins,
                            {"m": b.shape[0], "k": b.shape[1], "r2": r2, "tol": tol,
                             "seed": seed})


def check_mixing_coherence(u, transform=Transform.DCT, delta=0.01, trials=100, seed=0):
    """Coherence of ``F D U`` over random sign draws against its high-probability bound."""
    u = as_dense(u)
    m, r = u.shape
    transform = Transform(transform)
    bound = mixing_coherence_bound(r, m, delta, transform.eta)
    margins = []
    bad = 0
    for k in range(trials):
        d = _rng(seed, k).integers(0, 2, size=m) * 2.0 - 1.0
        mu = coherence(orthonormal_transform(u * d[:, None], transform, axis=0))
        margins.append(bound - mu)
        bad += mu > bound
    return BoundCheckReport("mixing-coherence", trials, int(bad), margins,
                            {"m": m, "r": r, "delta": delta, "eta": transform.eta,
                             "bound": bound, "seed": seed},
                            allowed=binomial_allowance(trials, delta))


def check_srtt_embedding(u, eps=0.3, delta=0.1, transform=Transform.HADAMARD, trials=100,
                         seed=0, r2=None):
    """Whether an SRTT with the required row count embeds ``range(U)`` with distortion ``eps``.

    A trial fails when some ``sigma_j(Y U)`` leaves ``[1 - eps, 1 + eps]``.
    The theory allows failure probability ``3 delta``.
    """
    u = as_dense(u)
    m, r1 = u.shape
    transform = Transform(transform)
    if r2 is None:
        r2 = srtt_required_samples(r1, m, eps, delta, transform.eta)
        if r2 is None:
            raise ConfigError(f"required sample count exceeds m={m}")
    margins = []
    bad = 0
    for k in range(trials):
        y = build_sketch(SRTT(transform), m, r2, _seed(seed, k))
        s = singular_values(apply_left(y, u))
        dist = float(np.max(np.abs(s - 1.0)))
        margins.append(eps - dist)
        bad += dist > eps
    return BoundCheckReport("srtt-embedding", trials, int(bad), margins,
                            {"m": m, "r1": r1, "r2": r2, "eps": eps, "delta": delta,
                             "eta": transform.eta, "seed": seed},
                            allowed=binomial_allowance(trials, min(1.0, 3.0 * delta)))


# ------------------------------------------------------- tails and spikes

def tail_spectrum(head, tail, n, tail_scale=1.0):
    """Head values followed by ``n - len(head)`` tail values.

    The tail continues from ``head[-1] * tail_scale`` following ``tail``'s
    shape, skipping its first value: a constant tail repeats ``head[-1]``.
    """
    head = np.asarray(head, dtype=np.float64)
    h = head.size
    if h < 1 or h > n:
        raise DimensionError(f"head length {h} must lie in [1, n={n}]")
    if n == h:
        return head.copy()
    shape = spectrum(tail, n - h + 1)[1:]
    return np.concatenate([head, head[-1] * tail_scale * shape])


def tail_effect_profile(spec_head, tails, r, trials, n=1000, tail_scale=1.0, seed=0):
    """Mean ``sigma_i(AX)`` for several tails sharing one head.

    ``A = diag(sigma)`` suffices because a Gaussian embedding is rotation
    invariant. The same Gaussian draw is used for every tail in a trial, so
    the curves differ only through the tail. Returns a dict with
    ``spectra`` (n,) and ``means``, ``samples`` per tail in input order.
    """
    spectra = [tail_spectrum(spec_head, t, n, tail_scale) for t in tails]
    samples = [np.empty((trials, r)) for _ in tails]
    for k in range(trials):
        g = _rng(seed, k).standard_normal((n, r)) / math.sqrt(r)
        for sig, out in zip(spectra, samples):
            out[k] = singular_values(sig[:, None] * g)
    return {
        "spectra": spectra,
        "samples": samples,
        "means": [s.mean(axis=0) for s in samples],
        "tail_norms": [float(np.linalg.norm(s[len(spec_head):])) for s in spectra],
    }


def check_tail_ordering(profile, last=3):
    """Heavier tails (larger Frobenius norm) must give strictly larger means at the last indices.

    Margins are, per checked index, the smallest gap between consecutive
    tails in weight order.
    """
    order = np.argsort(profile["tail_norms"])
    means = np.array([profile["means"][j] for j in order])
    r = means.shape[1]
    gaps = np.diff(means[:, r - last:], axis=0)
    margins = gaps.min(axis=0)
    bad = int(np.count_nonzero(margins <= 0))
    return BoundCheckReport("tail-ordering", len(profile["samples"][0]), bad, margins.tolist(),
                            {"last": last, "r": r})


def check_tail_gap(profile, gap_index, min_ratio=100.0):
    """Every tail's mean estimates must drop by more than ``min_ratio`` across the gap."""
    ratios = [float(m[gap_index - 1] / m[gap_index]) for m in profile["means"]]
    bad = sum(q <= min_ratio for q in ratios)
    return BoundCheckReport("tail-gap", len(profile["samples"][0]), int(bad),
                            [q / min_ratio - 1.0 for q in ratios],
                            {"gap_index": gap_index, "min_ratio": min_ratio, "ratios": ratios})


def spiked_top_estimate(n, r, spike, noise, rng):
    """Largest singular value of ``diag(spike, noise, ..., noise) G / sqrt(r)``."""
    g = rng.standard_normal((n, r))
    g[0] *= spike
    g[1:] *= noise
    v0 = np.ones(r)
    s = spla.svds(g, k=1, v0=v0, return_singular_vectors=False, tol=1e-10)
    return float(s[0]) / math.sqrt(r)


def check_spiked(n=4000, r=2000, spike=4.0, noise=1.0, trials=50, seed=0, rel_tol=0.10):
    """Mean top sketched singular value within ``rel_tol`` of its asymptotic limit."""
    target = spiked_limit(spike, noise, n / r)
    est = np.array([spiked_top_estimate(n, r, spike, noise, _rng(seed, k))
                    for k in range(trials)])
    rel = abs(est.mean() - target) / target
    return BoundCheckReport("spiked", trials, int(rel > rel_tol), [rel_tol - rel],
                            {"n": n, "r": r, "spike": spike, "noise": noise, "seed": seed,
                             "limit": target, "mean": float(est.mean())})
