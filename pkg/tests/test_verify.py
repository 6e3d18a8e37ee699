import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from liouville._validation import ConfigurationError, RangeError
from liouville.field import DomainSpec, GridField
from liouville.path import sample_path
from liouville.seeding import child_seed
from liouville.verify import (
    covariance_check,
    harmonic_sup_tail,
    lower_tail_curve,
    moment_samples,
    negative_moment_sweep,
    positive_moment_sweep,
    scale_invariance_identity,
    tail_curve,
    upper_tail_curve,
)

from oracles import expected_log_exit_integral

DT = 4e-4  # coarse paths keep the dense Y factorisations small


def _quiet(func, *args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        return func(*args, **kwargs)


def _exit_times(seed, replicas, dt=DT):
    return np.array([sample_path(dt, seed=child_seed(seed, "moment-path", i)).tau for i in range(replicas)])


# ---------------------------------------------------------------------------
# scale invariance


def test_scale_identity_examples():
    x, y = np.array([0.0, 0.0]), np.array([0.3, 0.0])
    assert abs(scale_invariance_identity(0.5, x, y, 0.1)) < 1e-12
    # sub-eps branch: |x - y| <= lam eps
    assert abs(scale_invariance_identity(0.5, x, np.array([0.02, 0.0]), 0.1)) < 1e-12
    near_one = scale_invariance_identity(1 - 1e-9, x, y, 0.1)
    assert abs(near_one) < 1e-8


@settings(max_examples=200, deadline=None)
@given(lam=st.floats(0.01, 0.99), r1=st.floats(0, 0.5), r2=st.floats(0, 0.5),
       t1=st.floats(0, 2 * math.pi), t2=st.floats(0, 2 * math.pi), eps=st.floats(1e-3, 1.0))
def test_scale_identity_holds_on_all_branches(lam, r1, r2, t1, t2, eps):
    x = np.array([r1 * math.cos(t1), r1 * math.sin(t1)])
    y = np.array([r2 * math.cos(t2), r2 * math.sin(t2)])
    assert abs(scale_invariance_identity(lam, x, y, eps)) < 1e-12


def test_scale_identity_range_errors():
    with pytest.raises(RangeError):
        scale_invariance_identity(1.0, (0, 0), (0.1, 0), 0.1)
    with pytest.raises(RangeError):
        scale_invariance_identity(0.5, (0.6, 0), (0.1, 0), 0.1)
    with pytest.raises(RangeError):
        scale_invariance_identity(0.5, (0, 0), (0.1, 0), 1.5)


# ---------------------------------------------------------------------------
# moments


def test_gamma_zero_moments_are_exit_time_functionals():
    s = moment_samples(0.0, 0.0, [0.1, 0.05], 50, seed=3, dt=DT)
    tau = _exit_times(3, 50)
    np.testing.assert_allclose(s[:, 0, 0], tau, rtol=1e-12)
    np.testing.assert_allclose(s[:, 1, 0], tau, rtol=1e-12)
    np.testing.assert_allclose(s[:, 0, 1], np.minimum(tau, 1.0), rtol=1e-12)


def test_moment_mean_matches_occupation_integral():
    # alpha gamma = 1: E I = E int_0^tau ds / (|B_s| + eps), whatever the field does
    s = moment_samples(1.0, 1.0, [0.1], 300, seed=5, dt=DT)[:, 0, 0]
    se = s.std(ddof=1) / math.sqrt(len(s))
    assert abs(s.mean() - expected_log_exit_integral(0.1)) < 4 * se


def test_moment_samples_cached_and_read_only():
    a = moment_samples(0.0, 0.0, [0.1], 10, seed=1, dt=DT)
    b = moment_samples(0.0, 0.0, [0.1], 10, seed=1, dt=DT)
    assert a is b and not a.flags.writeable


def test_moment_samples_independent_of_workers():
    a = moment_samples(1.0, 0.5, [0.1], 6, seed=9, dt=DT, workers=1)
    from liouville import verify

    verify._MOMENT_CACHE.clear()
    b = moment_samples(1.0, 0.5, [0.1], 6, seed=9, dt=DT, workers=2)
    assert np.array_equal(a, b)


def test_gamma_zero_sweeps_have_flat_trend():
    pos = _quiet(positive_moment_sweep, 0.3, 0.0, 0.0, [0.1, 0.05, 0.025], 40, seed=2, dt=DT)
    neg = _quiet(negative_moment_sweep, 0.0, 0.0, [0.1, 0.05, 0.025], 40, seed=2, dt=DT)
    for sweep in (pos, neg):
        assert len(set(sweep.means)) == 1
        assert abs(sweep.trend_slope) < 1e-12 and sweep.passed
    tau = _exit_times(2, 40)
    assert pos.means[0] == pytest.approx(np.mean(tau**0.3))
    assert neg.means[0] == pytest.approx(np.mean(1 / np.minimum(tau, 1)))
    assert all(m > 0 for m in neg.means)


def test_sweep_errors_and_warning():
    with pytest.raises(RangeError):
        positive_moment_sweep(1.0, 1.0, 1.0, [0.1, 0.05], 10, dt=DT)
    with pytest.raises(ConfigurationError):
        _quiet(negative_moment_sweep, 1.0, 1.0, [0.1], 10, dt=DT)
    with pytest.warns(RuntimeWarning, match="1000"):
        negative_moment_sweep(0.0, 0.0, [0.1, 0.05], 10, dt=DT)


def test_sweep_report_shape():
    sweep = _quiet(negative_moment_sweep, 0.0, 0.0, [0.1, 0.05], 10, dt=DT)
    rep = sweep.to_report()
    assert rep["lemma"] == "negative-moment" and len(rep["rows"]) == 2
    assert set(rep) >= {"fitted_slope", "ci", "pass", "seeds", "parameters"}


# ---------------------------------------------------------------------------
# tails


def test_tail_curve_exact_power_law():
    r = 2.0 ** -np.arange(5)
    n = 2**20
    curve = tail_curve("synthetic", r, (n * r / 2).astype(int), n, lambda s, ci: s > 0)
    assert curve.slope == pytest.approx(1.0, abs=1e-9)
    assert curve.monotone and curve.passed
    assert all(lo <= p <= hi for lo, p, hi in zip(curve.ci_low, curve.probabilities, curve.ci_high))


def test_tail_curve_insufficient_hits():
    curve = tail_curve("synthetic", [0.5, 0.25], [0, 0], 100, lambda s, ci: True)
    assert curve.status == "insufficient replicas" and not curve.passed
    curve = tail_curve("synthetic", [0.5, 0.25, 0.125], [9, 3, 1], 100, lambda s, ci: True)
    assert curve.status == "too few scales with enough hits"
    assert curve.fitted == (True, False, False)


def test_gamma_zero_tails_match_exit_time_oracle():
    r = [0.5, 0.25, 0.125, 0.0625]
    tau = _exit_times(4, 300)
    low = lower_tail_curve(1.0, 0.0, 0.0, r, 300, seed=4, dt=DT)
    assert low.hits == tuple(int(np.sum(np.minimum(tau, 1) <= rk)) for rk in r)
    up = upper_tail_curve(0.5, 0.0, 0.0, [0.25, 0.1, 0.05], 300, seed=4, dt=DT)
    assert up.hits == tuple(int(np.sum(tau >= rk**-0.5)) for rk in [0.25, 0.1, 0.05])


def test_tails_are_monotone_by_construction():
    r = [0.5, 0.25, 0.125, 0.0625]
    low = lower_tail_curve(1.0, 1.0, 1.0, r, 200, seed=6, dt=DT)
    up = upper_tail_curve(1.0, 1.0, 1.0, [1.0, 0.5, 0.25], 200, seed=6, dt=DT)
    assert low.monotone and up.monotone
    assert all(0 <= p <= 1 for p in low.probabilities + up.probabilities)


def test_harmonic_tail_zero_field_and_preconditions():
    domain = DomainSpec("unit-square", 64)
    zero = lambda seed: GridField(domain, np.zeros((domain.size, domain.size)))  # noqa: E731
    sup, per_x = harmonic_sup_tail([0.04, 0.02, 0.01], 5, domain=domain, field_factory=zero)
    assert sup.hits == (0, 0, 0) and sup.status == "insufficient replicas"
    assert len(per_x) == 1
    with pytest.raises(RangeError):
        harmonic_sup_tail([0.5], 5, domain=domain)
    with pytest.raises(RangeError):
        harmonic_sup_tail([0.04], 5, x_grid=[(0.7, 0.0)], domain=domain)


def test_harmonic_tail_small_run():
    domain = DomainSpec("unit-square", 64)
    sup, per_x = harmonic_sup_tail([0.1, 0.05, 0.025], 200, x_grid=[(0, 0), (0.1, 0.1)], domain=domain)
    assert sup.monotone or sup.status != "ok"
    for curve in per_x:
        assert all(s <= h for s, h in zip(curve.hits, sup.hits))


# ---------------------------------------------------------------------------
# covariance bracket


def test_covariance_exact_bracket_on_disc():
    disc = DomainSpec("unit-disc", 256)
    pairs = [((0.0, 0.0), (0.0, 0.0)), ((0.0, 0.0), (0.3, 0.0)), ((-0.2, 0.3), (0.25, -0.2))]
    rep = covariance_check(disc, [(0.1, 0.1), (0.1, 0.05), (0.2, 0.05)], pairs, method="exact")
    assert rep.max_abs_deviation < 3.0
    # diagonal with eta = eps: deviation is log C(0, disc) = 0 up to lattice error
    assert abs(rep.rows[0]["deviation"]) < 0.05


def test_covariance_empirical_agrees_with_exact():
    sq = DomainSpec("unit-square", 64)
    pairs = [((0.0, 0.0), (0.3, 0.0))]
    exact = covariance_check(sq, [(0.1, 0.1)], pairs, method="exact").rows[0]["covariance"]
    emp = covariance_check(sq, [(0.1, 0.1)], pairs, replicas=2000, seed=1).rows[0]
    assert abs(emp["covariance"] - exact) < 4 * emp["stderr"]


def test_covariance_preconditions():
    sq = DomainSpec("unit-square", 64)
    with pytest.raises(ConfigurationError):
        covariance_check(sq, [(0.05, 0.1)], [((0, 0), (0.1, 0))], method="exact")
    with pytest.raises(ConfigurationError):
        covariance_check(sq, [(0.1, 0.1)], [((0.7, 0), (0.1, 0))], method="exact")
