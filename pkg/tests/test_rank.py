import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sketchrank.errors import ConfigError
from sketchrank.linalg import qr_pivoted
from sketchrank.rank import (RankEstimateConfig, Status, count_above_threshold, estimate_rank,
                             estimate_rank_adaptive, gn_free_rank, start_sketch)
from sketchrank.sketch import HRTT, SRTT, Gaussian
from sketchrank.synthetic import FAMILIES, make_test_matrix, spectrum


def test_count_above_threshold_examples():
    assert count_above_threshold([3, 2, 1], 2) == 1
    assert count_above_threshold([], 0.5) == 0
    assert count_above_threshold([1, 1e-4, 1e-8], 1e-6) == 2


def test_gn_free_rank_examples():
    assert gn_free_rank(np.diag([3.0, 2.0, 1.0]), 1.5) == 2
    assert gn_free_rank(np.zeros((4, 4)), 1e-12) == 0
    assert gn_free_rank(np.array([[-3.0, 1.0], [0.0, 0.5]]), 1.0) == 1
    with pytest.raises(ValueError):
        gn_free_rank(np.array([[1.0, 0.0], [1.0, 1.0]]), 0.5)


@pytest.mark.parametrize("r1,expect", [(1, 2), (5, 6), (9, 10), (10, 11), (15, 17), (20, 22),
                                       (25, 28), (210, 231), (1200, 1320)])
def test_oversampling_rounds_half_up(r1, expect):
    assert RankEstimateConfig(eps=1.0, r1=r1).oversampled() == expect


def test_config_validation():
    for bad in [dict(eps=0.0, r1=5), dict(eps=-1.0, r1=5), dict(eps=float("nan"), r1=5),
                dict(eps=1.0, r1=0), dict(eps=1.0, r1=2.5), dict(eps=1.0, r1=5, sv_method="x"),
                dict(eps=1.0, r1=5, r2_factor=0.5), dict(eps=1.0, r1=5, max_doublings=-1)]:
        with pytest.raises(ConfigError):
            RankEstimateConfig(**bad)
    with pytest.raises(ConfigError):
        estimate_rank(np.ones((20, 20)), RankEstimateConfig(eps=0.1, r1=19))


def test_zero_matrix():
    rep = estimate_rank(np.zeros((40, 30)), RankEstimateConfig(eps=1e-8, r1=5))
    assert rep.r_hat == 0 and rep.status is Status.CONVERGED


def test_fe_family_small_cap():
    a = make_test_matrix(400, 400, FAMILIES["fe"], seed=4)
    sigma = spectrum(FAMILIES["fe"], 400)
    eps = 1e-4
    for seed in range(20):
        rep = estimate_rank(a, RankEstimateConfig(eps=eps, r1=20, seed=seed))
        assert rep.status is Status.CONVERGED
        assert rep.r_hat in (8, 9)
        assert sigma[rep.r_hat] < 10 * eps and sigma[rep.r_hat - 1] > 0.1 * eps


def test_report_shape_and_threshold_semantics(se_matrix):
    cfg = RankEstimateConfig(eps=1e-2, r1=400, seed=1)
    rep = estimate_rank(se_matrix, cfg)
    assert rep.rounds == [(400, 440, 880)]
    assert rep.sv_estimates.size == 400 and rep.sv_oversampled.size == 440
    assert np.array_equal(rep.sv_estimates, rep.sv_oversampled[:400])
    assert np.all(np.diff(rep.sv_estimates) <= 0)
    assert rep.r_hat == count_above_threshold(rep.sv_estimates, cfg.eps)
    assert rep.sv_estimates[rep.r_hat] <= cfg.eps < rep.sv_estimates[rep.r_hat - 1]
    assert rep.seed == 1


def test_left_sketch_clamped_to_m(se_matrix):
    rep = estimate_rank(se_matrix, RankEstimateConfig(eps=1e-6, r1=1200, seed=0))
    assert rep.rounds[0] == (1200, 1320, 2000)


def test_adaptive_gap_doubling(gap_incoherent):
    rep = estimate_rank_adaptive(gap_incoherent, RankEstimateConfig(eps=1e-6, r1=40, seed=2))
    assert rep.status is Status.CONVERGED
    assert rep.r_hat == 200
    assert [r[0] for r in rep.rounds] == [40, 80, 160, 320]
    assert rep.rounds[-1][0] >= 200


def test_identity_hits_cap():
    rep = estimate_rank_adaptive(np.eye(500), RankEstimateConfig(eps=0.5, r1=16,
                                                                 max_doublings=2))
    assert rep.status is Status.HIT_CAP
    assert rep.r_hat == rep.rounds[-1][0] == 64
    assert len(rep.rounds) == 3
    single = estimate_rank(np.eye(500), RankEstimateConfig(eps=0.5, r1=16))
    assert single.status is Status.HIT_CAP and single.r_hat == 16


def test_adaptive_without_restart_is_identical(se_matrix):
    cfg = RankEstimateConfig(eps=1e-2, r1=400, seed=9)
    a = estimate_rank(se_matrix, cfg)
    b = estimate_rank_adaptive(se_matrix, cfg)
    assert a.to_dict() == b.to_dict()
    assert np.array_equal(a.sv_oversampled, b.sv_oversampled)


def test_adaptive_extends_rather_than_redraws(gap_incoherent):
    # round-two sketch must contain the round-one sketch as its leading block
    cfg = RankEstimateConfig(eps=1e-6, r1=40, seed=3)
    state = start_sketch(gap_incoherent, cfg)
    first = state.sketch() / state.right.scale[None, :] / state.left.scale[:, None]
    state.grow(right_dim=88, left_dim=176)
    second = state.sketch() / state.right.scale[None, :] / state.left.scale[:, None]
    assert np.allclose(second[:first.shape[0], :first.shape[1]], first)


def test_cap_clipped_by_dimensions():
    rng = np.random.default_rng(1)
    a = rng.standard_normal((60, 50))
    rep = estimate_rank_adaptive(a, RankEstimateConfig(eps=1e-6, r1=20, max_doublings=5))
    assert rep.status is Status.HIT_CAP
    assert rep.rounds[-1][1] <= 50
    assert [r[0] for r in rep.rounds] == [20, 40, 45]


@pytest.mark.parametrize("kind", [Gaussian(), SRTT(), HRTT()])
def test_sketch_kinds_recover_gap(kind, gap_incoherent):
    rep = estimate_rank(gap_incoherent, RankEstimateConfig(eps=1e-2, r1=210, right_kind=kind,
                                                           seed=4))
    assert rep.r_hat == 100


def test_qr_diag_method_recovers_gap(gap_incoherent):
    rep = estimate_rank(gap_incoherent, RankEstimateConfig(eps=1e-2, r1=210,
                                                           sv_method="qr-diag", seed=5))
    assert rep.r_hat == 100


def test_free_rank_from_sketch(gap_incoherent):
    cfg = RankEstimateConfig(eps=1e-2, r1=210, seed=6)
    (_, r), _ = qr_pivoted(start_sketch(gap_incoherent, cfg).sketch())
    assert gn_free_rank(r, 1e-2) == 100


@settings(max_examples=25, deadline=None)
@given(st.floats(1e-10, 1.0), st.floats(1e-10, 1.0), st.integers(0, 2**32))
def test_rank_monotone_in_eps(e1, e2, seed):
    a = make_test_matrix(120, 100, FAMILIES["sp"], seed=11)
    lo, hi = sorted((e1, e2))
    r_lo = estimate_rank(a, RankEstimateConfig(eps=lo, r1=60, seed=seed)).r_hat
    r_hi = estimate_rank(a, RankEstimateConfig(eps=hi, r1=60, seed=seed)).r_hat
    assert r_lo >= r_hi


@settings(max_examples=25, deadline=None)
@given(st.integers(1, 40), st.floats(1e-6, 1e-1), st.integers(0, 2**32))
def test_converged_reports_satisfy_threshold_invariant(r1, eps, seed):
    a = make_test_matrix(100, 90, FAMILIES["fe"], seed=12)
    rep = estimate_rank(a, RankEstimateConfig(eps=eps, r1=r1, seed=seed))
    sv = rep.sv_estimates
    assert np.all(np.diff(sv) <= 0)
    if rep.status is Status.CONVERGED:
        assert sv[rep.r_hat] <= eps
        assert rep.r_hat == 0 or sv[rep.r_hat - 1] > eps
    else:
        assert rep.r_hat == r1 and np.all(sv > eps)
