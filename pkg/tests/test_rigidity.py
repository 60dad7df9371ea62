import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaf_rigidity import linstat as LS
from gaf_rigidity import rigidity as RG
from gaf_rigidity import sampler as S
from gaf_rigidity import zerofinder as Z
from gaf_rigidity.errors import IllConditionedWarning, NonConvergent, SupportExceedsValidity

from conftest import FAMILIES

GEF = FAMILIES["gef"]


def _power_sums_of(points, n):
    return RG.power_sums(points, n)


def test_reconstruct_two_roots():
    pts = RG.newton_reconstruct([2, 3, 5])
    assert np.allclose(np.sort_complex(pts), [1, 2], atol=1e-12)
    assert np.allclose(_power_sums_of(pts, 2), [2, 3, 5], atol=1e-12)


def test_reconstruct_conjugate_pair():
    e = RG.elementary_symmetric([2, 0, -2])
    assert np.allclose(e, [1, 0, 1])
    pts = RG.newton_reconstruct([2, 0, -2])
    assert RG.matching_distance(pts, [-1j, 1j]) <= 1e-12


def test_reconstruct_empty():
    assert len(RG.newton_reconstruct([0])) == 0
    assert len(RG.newton_reconstruct([0, 5, 7])) == 0


def test_reconstruct_rejects_bad_counts():
    for bad in ([], [1.5, 1], [-1], [2 + 1j, 0, 0], [3, 1, 1]):
        with pytest.raises(ValueError):
            RG.newton_reconstruct(bad)


def test_elementary_symmetric_matches_polynomial_coefficients(rng):
    pts = rng.normal(size=7) + 1j * rng.normal(size=7)
    e = RG.elementary_symmetric(_power_sums_of(pts, 7))
    coeffs = np.poly(pts)  # z^7 - e1 z^6 + e2 z^5 ...
    assert np.allclose(e * (-1.0) ** np.arange(8), coeffs, atol=1e-10)


points = st.lists(
    st.tuples(st.floats(0.0, 1.0), st.floats(-math.pi, math.pi)).map(lambda p: p[0] * complex(math.cos(p[1]), math.sin(p[1]))),
    min_size=1,
    max_size=12,
)


@settings(max_examples=100, deadline=None)
@given(points, st.integers(0, 3))
def test_round_trip_power_sums(pts, repeats):
    # repeated points: individual roots of a cluster are poorly fixed, their power sums are not
    pts = pts + pts[:repeats] + pts[:repeats]
    S_ = _power_sums_of(pts, len(pts))
    back = _power_sums_of(RG.newton_reconstruct(S_), len(pts))
    assert np.max(np.abs(back - S_)) <= 1e-6


@settings(max_examples=100, deadline=None)
@given(st.integers(1, 12), st.integers(0, 2**32 - 1))
def test_round_trip_points(n, seed):
    rng = np.random.default_rng(seed)
    pts = np.sqrt(rng.uniform(0, 1, n)) * np.exp(2j * np.pi * rng.uniform(0, 1, n))
    gaps = np.abs(pts[:, None] - pts[None, :]) + np.eye(n)
    if gaps.min() < 0.05:
        return
    rec = RG.newton_reconstruct(_power_sums_of(pts, n))
    assert RG.matching_distance(pts, rec) <= 1e-6


def test_ill_conditioned_recursion_warns():
    S_ = np.array([30] + [100.0] * 30, dtype=complex)
    with pytest.warns(IllConditionedWarning):
        out = RG.newton_reconstruct(S_)
    assert len(out) == 30


def test_matching_distance():
    a = [0, 1, 1j]
    b = [1j + 0.1, -0.1, 1.0]
    assert RG.matching_distance(a, b) == pytest.approx(0.2)
    assert RG.matching_distance([], []) == 0.0
    with pytest.raises(ValueError):
        RG.matching_distance([0], [])


def _zero_set(points, radius):
    pts = np.asarray(points, dtype=complex)
    return Z.ZeroSet(pts, radius, np.zeros(len(pts)), len(pts), 0)


def test_recover_with_no_zeros():
    zs = _zero_set([], 10.0)
    for k in (1, 2, 3):
        assert RG.recover_power_sum(GEF, zs, k, 0.5, 1.0) == 0


def test_recover_needs_full_support():
    with pytest.raises(SupportExceedsValidity):
        RG.recover_power_sum(GEF, _zero_set([], 3.0), 1, 0.5, 1.0)


@pytest.mark.parametrize("seed", [1, 2, 3])
@pytest.mark.parametrize("k", [0, 1, 2])
def test_estimator_identity_per_trial(seed, k):
    eta, L = 0.5, 1.0
    tf = LS.TestFunction(k, eta, L)
    fn = S.sample_for_radius(GEF, tf.outer, seed)
    zs = Z.zeros_in_disk(fn, tf.outer)
    inside = zs.points[np.abs(zs.points) <= L]
    s_true = complex(np.sum(inside**k))
    s_hat = RG.recover_power_sum(GEF, zs, k, eta, L)
    stat = LS.linear_statistic(zs, tf)
    expected = LS.expected_statistic(GEF, tf)
    assert abs((s_hat - s_true) + (stat - expected)) <= 1e-10 * max(1.0, abs(stat))


@pytest.fixture(scope="module")
def gef_half():
    return RG.rigidity_experiment(GEF, 1.0, 2, 0.5, 400, seed=3)


@pytest.mark.slow
def test_unbiased(gef_half):
    assert gef_half.failed == 0
    for k in range(3):
        mean, se = gef_half.mean_error(k)
        assert abs(mean) <= 3 * se


@pytest.mark.slow
def test_rms_matches_variance_quadrature(gef_half):
    # S_hat - S is minus the centred linear statistic, so its mean square is the variance
    want = LS.variance_quadrature(GEF, LS.TestFunction(0, 0.5, 1.0))
    err = np.abs(gef_half.errors(0)) ** 2
    assert abs(err.mean() - want) <= 3 * err.std(ddof=1) / math.sqrt(len(err))


@pytest.mark.slow
def test_rms_non_increasing_in_L():
    rms = [RG.rigidity_experiment(GEF, L, 0, 1.0, 300, seed=8).rms_error(0) for L in (1.0, 2.0, 4.0)]
    assert all(b <= 1.1 * a for a, b in zip(rms, rms[1:])), rms


@pytest.mark.slow
def test_rms_non_increasing_in_inverse_eta():
    rms = [RG.rigidity_experiment(GEF, 1.0, 0, eta, 300, seed=9).rms_error(0) for eta in (1.0, 0.5, 1 / 3)]
    assert all(b <= 1.1 * a for a, b in zip(rms, rms[1:])), rms


def test_report_contents():
    rep = RG.rigidity_experiment(GEF, 1.0, 3, 1.0, 20, seed=2)
    d = rep.as_dict()
    assert d["config"] == {"family": "gef", "D_radius": 1.0, "K_max": 3, "eta": 1.0, "trials": 20, "seed": 2,
                           "tail_tol": S.DEFAULT_TAIL_TOL}
    assert len(d["trials"]) == 20 and d["aggregate"]["failed_trials"] == 0
    for rec in rep.records:
        assert rec.recovered_count == round(rec.count_estimate)
        assert rec.distance_to_integer <= 0.5
        assert len(rec.recovered_power_sums) == 4
        assert (rec.matching_distance is not None) == (rec.recovered_count == rec.true_count)
        if rec.count_ok:
            assert len(rec.reconstructed_points) == rec.true_count
    assert 0 <= rep.count_success_rate <= 1


def test_experiment_is_deterministic_across_workers():
    one = RG.rigidity_experiment(GEF, 1.0, 1, 1.0, 12, seed=5)
    two = RG.rigidity_experiment(GEF, 1.0, 1, 1.0, 12, seed=5, workers=3)
    assert one == two


def test_failed_trials_are_recorded(monkeypatch):
    real = Z.zeros_in_disk
    calls = {"n": 0}

    def flaky(fn, R):
        calls["n"] += 1
        if calls["n"] == 2:
            raise Z.RootFindingStalled("stalled")
        return real(fn, R)

    monkeypatch.setattr(Z, "zeros_in_disk", flaky)
    rep = RG.rigidity_experiment(GEF, 1.0, 1, 1.0, 5, seed=5)
    assert rep.failed == 1
    assert "RootFindingStalled" in rep.records[1].error
    assert len(rep.good) == 4 and len(rep.errors(0)) == 4


def test_infeasible_support_fails_fast():
    with pytest.raises(NonConvergent):
        RG.rigidity_experiment(FAMILIES["double-exp"], 1.0, 3, 0.125, 500, seed=7)


def test_bad_arguments():
    with pytest.raises(ValueError):
        RG.rigidity_experiment(GEF, 1.0, -1, 1.0, 5, seed=1)
    with pytest.raises(ValueError):
        RG.rigidity_experiment(GEF, 1.0, 1, 1.0, 0, seed=1)


@pytest.mark.slow
def test_ml3_errors_decrease_below_level_three():
    # the two runs share their random functions (same trial seeds), so the comparison is paired
    spec = FAMILIES["ml-3"]
    coarse = RG.rigidity_experiment(spec, 1.0, 2, 1.0, 60, seed=4)
    fine = RG.rigidity_experiment(spec, 1.0, 2, 0.9, 60, seed=4)
    for k in range(3):
        assert fine.rms_error(k) <= coarse.rms_error(k)
        for rep in (coarse, fine):
            mean, se = rep.mean_error(k)
            assert abs(mean) <= 3 * se
