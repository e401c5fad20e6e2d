import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from sketchrank import theory as T
from sketchrank.errors import DimensionError
from sketchrank.sketch import Transform
from sketchrank.synthetic import ExpDecay, PolyDecay, make_test_matrix, FAMILIES

mpmath.mp.dps = 40


# ----------------------------------------------------- closed-form evaluators

def test_mp_expectation_examples():
    assert T.mp_expectation_bounds(400, 100) == (10.0, 30.0)
    lo, hi = T.mp_expectation_bounds(49, 49)
    assert lo == 0.0 and hi == 14.0
    with pytest.raises(DimensionError):
        T.mp_expectation_bounds(10, 20)


def test_mp_tail_examples():
    assert T.mp_tail_probability(0) == 1.0
    assert T.mp_tail_probability(4) == pytest.approx(math.exp(-8), rel=1e-15)
    with pytest.raises(ValueError):
        T.mp_tail_probability(-1)


def test_gauss_ratio_examples():
    b = T.gauss_ratio_bounds(1, 100, 1000, 0.0, 0.0)
    assert b.lower == pytest.approx(0.9) and b.upper == pytest.approx(2.0)
    edge = T.gauss_ratio_bounds(50, 50, 100, 0.1, 2.0)
    assert edge.lower == pytest.approx(-2.0 / math.sqrt(50)) and edge.lower <= 0
    with pytest.raises(DimensionError):
        T.gauss_ratio_bounds(0, 5, 10, 0.0)
    with pytest.raises(ValueError):
        T.gauss_ratio_bounds(1, 5, 10, 1.5)


def test_embed_ratio_examples():
    assert T.embed_ratio_bounds(0.5, 0.0, 3.0) == (0.5, 1.5)
    lo, hi = T.embed_ratio_bounds(0.0, 0.5, 2.0)
    assert lo == 1.0 and hi == pytest.approx(math.sqrt(2))
    with pytest.raises(ValueError):
        T.embed_ratio_bounds(1.0, 0.0, 1.0)


def test_spiked_examples():
    assert T.spiked_limit(2.0, 1.0, 1.0) == pytest.approx(2 * math.sqrt(4 / 3), rel=1e-12)
    assert T.spiked_limit(2.0, 1.0, 1.0) == pytest.approx(2.3094, abs=1e-4)
    assert T.spiked_limit(1.2, 1.0, 1.0) == pytest.approx(2.0)
    assert T.spiked_limit(3.0, 1.0, 1e-300) == 3.0
    with pytest.raises(ValueError):
        T.spiked_limit(0.5, 1.0, 1.0)


def test_srtt_samples_examples():
    need = T.srtt_sample_requirement(50, 4096, 0.3, 0.1, 2)
    assert need == pytest.approx(219_900, rel=1e-3)
    assert T.srtt_required_samples(50, 4096, 0.3, 0.1, 2) is None
    assert T.srtt_sample_requirement(50, 4096, 0.3, 0.1, 1) == pytest.approx(need / 2, rel=1e-15)
    assert T.srtt_sample_requirement(50, 4096, 0.2, 0.1, 2) > need
    assert T.srtt_required_samples(2, 65536, 0.3, 0.1, 1) == math.ceil(
        T.srtt_sample_requirement(2, 65536, 0.3, 0.1, 1))
    with pytest.raises(ValueError):
        T.srtt_required_samples(5, 100, 0.4, 0.1, 2)
    with pytest.raises(ValueError):
        T.srtt_required_samples(5, 100, 0.2, 0.1, 3)


def test_mixing_bound_examples():
    assert T.mixing_coherence_bound(1, 1, 1.0, 2) == 2.0
    assert T.mixing_coherence_bound(1, 1024, 1.0, 2) == pytest.approx(
        2 / 1024 * (1 + math.sqrt(8 * math.log(1024))) ** 2)
    vals = [T.mixing_coherence_bound(4, m, 0.01, 2) for m in (256, 1024, 4096, 16384)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


# independent re-implementations in arbitrary precision

def mp_gauss(i, r, n, tr, t):
    i, r, n, tr, t = (mpmath.mpf(v) for v in (i, r, n, tr, t))
    lo = 1 - mpmath.sqrt(i / r) - t / mpmath.sqrt(r)
    hi = (1 + mpmath.sqrt((r - i + 1) / r) + tr * (1 + mpmath.sqrt((n - r) / r))
          + t / mpmath.sqrt(r) * (1 + tr))
    return lo, hi


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 500), st.integers(0, 500), st.integers(0, 2000), st.floats(0, 1),
       st.floats(0, 10))
def test_gauss_bounds_two_expressions(i, dr, dn, tr, t):
    r = i + dr
    n = r + dn
    b = T.gauss_ratio_bounds(i, r, n, tr, t)
    lo, hi = mp_gauss(i, r, n, tr, t)
    assert b.lower == pytest.approx(float(lo), rel=1e-12, abs=1e-12)
    assert b.upper == pytest.approx(float(hi), rel=1e-12)
    assert b.lower <= b.upper


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 200), st.integers(0, 10**6), st.floats(0.01, 0.33),
       st.floats(1e-6, 0.99), st.sampled_from([1, 2]))
def test_srtt_requirement_two_expressions(r1, dm, eps, delta, eta):
    m = r1 + dm
    got = T.srtt_sample_requirement(r1, m, eps, delta, eta)
    e, d = mpmath.mpf(eps), mpmath.mpf(delta)
    want = (6 * eta / e ** 2 * (mpmath.sqrt(r1) + mpmath.sqrt(8 * mpmath.log(m / d))) ** 2
            * mpmath.log(r1 / d))
    assert got == pytest.approx(float(want), rel=1e-12, abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 100), st.integers(0, 10**5), st.floats(1e-6, 1), st.sampled_from([1, 2]))
def test_mixing_bound_two_expressions(r, dm, delta, eta):
    m = r + dm
    want = (mpmath.mpf(eta) / m
            * (mpmath.sqrt(r) + mpmath.sqrt(8 * mpmath.log(m / mpmath.mpf(delta)))) ** 2)
    assert T.mixing_coherence_bound(r, m, delta, eta) == pytest.approx(float(want), rel=1e-12)


@settings(max_examples=100, deadline=None)
@given(st.floats(1, 100), st.floats(0.01, 10), st.floats(0.01, 20))
def test_spiked_two_expressions(ratio, noise, c):
    s = ratio * noise
    mps, mpn, mpc = mpmath.mpf(s), mpmath.mpf(noise), mpmath.mpf(c)
    if mps > mpn * mpmath.sqrt(1 + mpmath.sqrt(mpc)):
        want = mps * mpmath.sqrt(1 + mpc * mpn ** 2 / (mps ** 2 - mpn ** 2))
    else:
        want = mpn * (1 + mpmath.sqrt(mpc))
    assert T.spiked_limit(s, noise, c) == pytest.approx(float(want), rel=1e-12)


@settings(max_examples=50, deadline=None)
@given(st.floats(0, 0.99), st.floats(0, 10), st.floats(0, 10))
def test_embed_two_expressions(eps, tail, xn):
    lo, hi = T.embed_ratio_bounds(eps, tail, xn)
    want = mpmath.sqrt((1 + mpmath.mpf(eps)) ** 2 + (mpmath.mpf(tail) * mpmath.mpf(xn)) ** 2)
    assert lo == pytest.approx(1 - eps) and hi == pytest.approx(float(want), rel=1e-12)


def test_binomial_allowance():
    assert T.binomial_allowance(100, 0.0) == 0
    assert T.binomial_allowance(100, 0.3) == math.floor(30 + 3 * math.sqrt(21))
    assert T.binomial_allowance(10, 1.0) == 10


# ------------------------------------------------------------- sandwich

def test_sandwich_random_pairs_small():
    rep = T.sandwich_trials(pairs=30, n=40, r=12, seed=5)
    assert rep.violations == 0 and rep.passed
    assert len(rep.per_index_margins) == 12
    assert np.all(np.isfinite(rep.per_index_margins))


def test_sandwich_diagonal_identity_equality():
    sigma = np.linspace(3, 1, 10)
    rep = T.verify_deterministic_sandwich(np.diag(sigma), np.eye(10))
    assert rep.violations == 0
    # all quantities coincide, so the worst slack is zero up to roundoff
    assert np.max(np.abs(rep.per_index_margins)) < 1e-12


def test_sandwich_exact_rank_zero_tail(rng):
    u, _ = np.linalg.qr(rng.standard_normal((60, 8)))
    v, _ = np.linalg.qr(rng.standard_normal((50, 8)))
    a = (u * np.arange(8, 0, -1.0)) @ v.T
    g = rng.standard_normal((50, 8))
    s, _, _, _, _, tail, _ = T._sandwich_quantities(a, g)
    assert tail < 1e-12
    assert T.verify_deterministic_sandwich(a, g).violations == 0


def test_sandwich_catches_broken_inequality(rng, monkeypatch):
    a = rng.standard_normal((30, 30))
    g = rng.standard_normal((30, 6))
    real = T._sandwich_quantities

    def tampered(a, g):
        s, ag, b1, lo, hi, tail, gn = real(a, g)
        return s, ag * 0.0, b1, lo, hi, tail, gn

    monkeypatch.setattr(T, "_sandwich_quantities", tampered)
    assert T.verify_deterministic_sandwich(a, g).violations > 0


def test_sandwich_size_checks():
    with pytest.raises(DimensionError):
        T.verify_deterministic_sandwich(np.ones((5, 6)), np.ones((6, 2)))
    with pytest.raises(DimensionError):
        T.verify_deterministic_sandwich(np.ones((6, 5)), np.ones((5, 6)))


# ------------------------------------------------------------- Monte Carlo

def test_mp_expectation_means_near_edges():
    rep = T.check_mp_expectation(400, 100, trials=200, seed=1)
    assert rep.passed
    assert abs(rep.params["mean_min"] - 10) < 0.5
    assert abs(rep.params["mean_max"] - 30) < 0.5


def test_mp_tail_small():
    rep = T.check_mp_tail(100, 25, t=4.0, trials=500, seed=2)
    assert rep.violations == 0 and rep.passed


def test_gauss_ratio_small():
    a = make_test_matrix(200, 200, FAMILIES["fp"], seed=1)
    rep = T.check_gauss_ratio(a, r=20, trials=100, max_index=18, seed=3)
    assert rep.passed and len(rep.per_index_margins) == 18


def test_embedding_bounds_hold():
    a = make_test_matrix(128, 128, FAMILIES["sp"], seed=2)
    rep = T.check_embedding_bounds(a, r=40, leading=6, trials=30, seed=4)
    assert rep.trials > 0 and rep.violations == 0


def test_mixing_coherence_e1():
    rep = T.check_mixing_coherence(np.eye(1024, 1), Transform.DCT, delta=0.01, trials=100)
    assert rep.violations == 0
    assert rep.params["bound"] == pytest.approx(T.mixing_coherence_bound(1, 1024, 0.01, 2))


def test_mixing_coherence_hadamard_two_columns():
    rep = T.check_mixing_coherence(np.eye(256, 2), Transform.HADAMARD, delta=0.05, trials=50)
    assert rep.passed


def test_approx_orthogonalization_small():
    b = make_test_matrix(2000, 50, FAMILIES["fp"], seed=7)
    rep = T.check_approx_orthogonalization(b, r2=200, trials=3, seed=1)
    assert rep.passed and len(rep.per_index_margins) == 3


def test_srtt_embedding_small():
    rep = T.check_srtt_embedding(np.eye(4096, 1), eps=0.3, delta=0.2, trials=10, r2=2000)
    assert rep.passed


def test_tail_spectrum_layout():
    head = np.array([1.0, 0.5, 0.25])
    s = T.tail_spectrum(head, PolyDecay(0), 6)
    assert np.array_equal(s, [1, 0.5, 0.25, 0.25, 0.25, 0.25])
    s = T.tail_spectrum(head, PolyDecay(1), 5, tail_scale=1e-4)
    assert np.allclose(s[3:], 0.25e-4 * np.array([1 / 2, 1 / 3]))


def test_tail_profile_identical_tails_same_distribution():
    head = 10.0 ** (-0.1 * np.arange(20))
    a = T.tail_effect_profile(head, [ExpDecay(0.5)], r=19, trials=300, n=300, seed=1)
    b = T.tail_effect_profile(head, [ExpDecay(0.5)], r=19, trials=300, n=300, seed=10**6)
    ks = stats.ks_2samp(a["samples"][0][:, -1], b["samples"][0][:, -1])
    assert ks.pvalue > 0.05


def test_tail_ordering_small():
    head = 10.0 ** (-0.1 * np.arange(20))
    prof = T.tail_effect_profile(head, [PolyDecay(0), PolyDecay(1), ExpDecay(0.5)], r=19,
                                 trials=200, n=500, seed=2)
    rep = T.check_tail_ordering(prof, last=3)
    assert rep.passed


def test_spiked_small():
    rep = T.check_spiked(n=800, r=400, spike=4.0, noise=1.0, trials=5, seed=3, rel_tol=0.1)
    assert rep.passed


def test_report_to_dict_roundtrip():
    rep = T.BoundCheckReport("x", 3, 1, [0.5, np.float64(0.1)], {"a": 1}, allowed=1)
    d = rep.to_dict()
    assert d["passed"] is True and d["per_index_margins"] == [0.5, 0.1]
