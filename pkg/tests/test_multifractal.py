import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from sklearn.base import clone

from liouville._validation import ConfigurationError, RangeError
from liouville.clock import ClockProcess, clock_process, time_measure
from liouville.field import CircleAverageLadder, DomainSpec, build_gff, circle_average_ladder, rooted_shift
from liouville.multifractal import (
    BoxCountingDimension,
    ExponentEstimate,
    LocalClockExponent,
    TimeSet,
    box_counts,
    box_dimension,
    cantor_set,
    clock_image,
    combine_estimates,
    diffusivity,
    dyadic_scales,
    formula_beta,
    formula_diffusivity,
    formula_thick_dimension,
    formula_time_dimension,
    holder_image_bound_check,
    holder_set_fraction,
    local_clock_exponent,
    thick_time_set,
    thickness,
)
from liouville.path import sample_path

from oracles import cantor_dimension

exponents = st.floats(0.0, 1.999)


# ---------------------------------------------------------------------------
# closed forms


def test_formula_values():
    assert formula_beta(1, 1) == 0.75
    assert formula_time_dimension(1, 0) == 0.75
    assert formula_thick_dimension(2) == 0.0
    assert formula_thick_dimension(0) == 2.0
    assert formula_diffusivity(1, 1) == pytest.approx(2 / 3)
    assert formula_diffusivity(0, 1) == pytest.approx(0.4)
    assert formula_diffusivity(0, 0) == 0.5


@settings(max_examples=200, deadline=None)
@given(g=exponents)
def test_time_dimension_is_one_on_the_diagonal(g):
    assert formula_time_dimension(g, g) == pytest.approx(1.0, abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(a=exponents, g=exponents)
def test_formula_identities(a, g):
    assert formula_time_dimension(a, g) == pytest.approx((1 - a * a / 4) / formula_beta(a, g), rel=1e-14)
    assert formula_diffusivity(a, g) == pytest.approx(1 / (2 * formula_beta(a, g)), rel=1e-14)


@pytest.mark.parametrize("a,g", [(2.0, 1.0), (-0.1, 1.0), (1.0, 2.0), (1.0, math.nan)])
def test_formula_range_errors(a, g):
    with pytest.raises(RangeError):
        formula_beta(a, g)
    with pytest.raises(RangeError):
        formula_thick_dimension(2.5)


# ---------------------------------------------------------------------------
# time sets and box counting


def test_timeset_validation_and_from_mask():
    with pytest.raises(ConfigurationError):
        TimeSet([[0.0, 0.5], [0.4, 0.6]], (0, 1))
    with pytest.raises(ConfigurationError):
        TimeSet([[0.5, 0.2]], (0, 1))
    with pytest.raises(ConfigurationError):
        TimeSet([[0.5, 1.2]], (0, 1))
    t = np.arange(10) * 0.1
    S = TimeSet.from_mask(t, [1, 1, 0, 0, 1, 0, 1, 1, 1, 0], (0, 1))
    np.testing.assert_allclose(S.intervals, [[0.0, 0.1], [0.4, 0.4], [0.6, 0.8]])
    assert len(S) == 3 and S.lebesgue == pytest.approx(0.3)


def test_box_counts_by_hand():
    S = TimeSet([[0.0, 0.3], [0.55, 0.6]], (0, 1))
    # boxes [0, .25), [.25, .5) meet the first interval, [.5, .75) the second
    assert box_counts(S, [0.25, 0.5]).tolist() == [3, 2]


def test_box_dimension_of_interval():
    S = TimeSet([[0.0, 1.0]], (0, 1))
    est = box_dimension(S, (2.0**-12, 2.0**-4))
    assert est.value == pytest.approx(1.0, abs=0.02)
    assert "box" in est.estimator


def test_box_dimension_of_cantor_set():
    C = cantor_set(10)
    assert box_dimension(C).value == pytest.approx(cantor_dimension(), abs=0.03)


def test_box_dimension_of_point():
    S = TimeSet.from_points([0.3], (0, 1))
    assert box_dimension(S, (2.0**-12, 2.0**-4)).value == pytest.approx(0.0, abs=0.02)


def test_box_dimension_errors():
    empty = TimeSet(np.zeros((0, 2)), (0, 1))
    with pytest.raises(ConfigurationError):
        box_dimension(empty, (1e-3, 0.1))
    with pytest.raises(ConfigurationError):
        box_dimension(TimeSet([[0, 1]], (0, 1)), (0.2, 0.3))
    with pytest.raises(ConfigurationError):
        box_dimension(cantor_set(4), (1e-4, 0.1))


@settings(max_examples=30, deadline=None)
@given(shift=st.floats(-5, 5), factor=st.sampled_from([0.25, 0.5, 2.0, 4.0]))
def test_box_dimension_translation_and_scaling_invariant(shift, factor):
    C = cantor_set(8)
    base = box_dimension(C, (3.0**-7, 3.0**-2)).value
    moved = box_dimension(C.translated(shift), (3.0**-7, 3.0**-2)).value
    scaled = box_dimension(C.scaled(factor), (factor * 3.0**-7, factor * 3.0**-2)).value
    assert moved == pytest.approx(base, abs=1e-9)
    assert scaled == pytest.approx(base, abs=1e-9)


def test_estimator_follows_sklearn_conventions():
    est = BoxCountingDimension(scale_range=(1e-3, 0.1))
    assert clone(est).get_params() == {"scale_range": (1e-3, 0.1)}
    fitted = est.fit(TimeSet([[0, 1]], (0, 1)))
    assert fitted is est and hasattr(est, "value_")


def test_dyadic_scales():
    s = dyadic_scales(1 / 16, 1.0)
    np.testing.assert_allclose(s, [1.0, 0.5, 0.25, 0.125, 0.0625])


# ---------------------------------------------------------------------------
# thickness


def test_thickness_exact_on_analytic_ladder():
    radii = 0.2 * 2.0 ** -np.arange(6)
    for slope in (0.0, 1.3, 1.9):
        ladder = CircleAverageLadder(np.zeros(2), radii, slope * np.log(1 / radii) + 0.4)
        est = thickness(ladder)
        assert abs(est.value - slope) < 1e-12 and est.stderr < 1e-12
        assert est.r2 == pytest.approx(1.0) or slope == 0.0


def test_thickness_rejects_short_ladders():
    radii = np.array([0.2, 0.1])
    with pytest.raises(ConfigurationError):
        thickness(CircleAverageLadder(np.zeros(2), radii, np.zeros(2)))
    radii = np.array([0.2, 0.1, 0.05])
    with pytest.raises(ConfigurationError):
        thickness(CircleAverageLadder(np.zeros(2), radii, np.zeros(3)))


@pytest.fixture(scope="module")
def ladder_slopes():
    # 200 fields: thickness at a typical point and at a rooted point
    domain = DomainSpec("unit-square", 256)
    typical, rooted = [], []
    for s in range(200):
        f = build_gff(domain, s)
        typical.append(thickness(circle_average_ladder(f, (0.1, 0), 0.64, 0.02, 0.5)).value)
        r = rooted_shift(f, (0, 0), 1.5)
        rooted.append(thickness(circle_average_ladder(r, (0, 0), 0.64, 0.02, 0.5)).value)
    return np.array(typical), np.array(rooted)


def test_typical_point_is_zero_thick(ladder_slopes):
    vals = ladder_slopes[0]
    assert abs(vals.mean()) < 4 * vals.std(ddof=1) / math.sqrt(len(vals))


def test_rooted_point_has_thickness_alpha(ladder_slopes):
    assert ladder_slopes[1].mean() == pytest.approx(1.5, abs=0.15)


# ---------------------------------------------------------------------------
# thick-time sets and clock images


@pytest.fixture(scope="module")
def lbm_pair():
    domain = DomainSpec("unit-square", 128)
    path = sample_path(1e-5, seed=31)
    return path, build_gff(domain, 31)


LADDER = (0.32, 0.16, 0.08, 0.04)


def test_thick_times_infinite_tolerance_keeps_everything(lbm_pair):
    path, field = lbm_pair
    S = thick_time_set(path, field, 0.0, tol=math.inf, eps_ladder=LADDER, stride=8)
    assert len(S) == 1
    assert S.intervals[0, 0] == 0.0
    assert S.tag == "thick-times" and S.resolution == 8 * path.dt


def _sampled_fraction(S, path):
    # share of the stride grid on [0, tau) selected into S
    grid = math.ceil(path.tau_index / (S.resolution / path.dt))
    picked = np.sum(np.rint((S.intervals[:, 1] - S.intervals[:, 0]) / S.resolution) + 1)
    return picked / grid


@pytest.fixture(scope="module")
def thick_fractions():
    domain = DomainSpec("unit-square", 512)
    out = {0.0: [], 1.0: [], 1.9: []}
    for s in range(4):
        path, field = sample_path(1e-5, seed=s), build_gff(domain, s)
        for alpha, tol in ((0.0, 0.3), (1.0, 0.3), (1.9, 0.05)):
            out[alpha].append(_sampled_fraction(thick_time_set(path, field, alpha, tol, stride=8), path))
    return {a: float(np.mean(v)) for a, v in out.items()}


def test_typical_times_are_zero_thick(thick_fractions):
    f = thick_fractions
    assert f[0.0] > 0.35
    assert f[0.0] > 2 * f[1.0]
    assert f[1.9] < 0.01


@pytest.mark.xfail(strict=True, reason="zero-thick share of sampled times is ~0.45 at the default "
                   "window: regression slopes over 1.5 decades have sd ~0.45 (see decisions ledger)")
def test_zero_thick_times_are_majority_at_default_window(thick_fractions):
    assert thick_fractions[0.0] > 0.5


def test_clock_image_gamma_zero_and_order(lbm_pair):
    path, field = lbm_pair
    S = thick_time_set(path, field, 0.0, tol=0.3, eps_ladder=LADDER, stride=8)
    F0 = clock_process(path, field, 0.0, 0.04)
    np.testing.assert_allclose(clock_image(F0, S).intervals, S.intervals)
    F1 = clock_process(path, field, 1.0, 0.04)
    image = clock_image(F1, S)
    assert len(image) == len(S)
    assert np.all(np.diff(image.intervals.ravel()) >= 0)
    full = clock_image(F1, TimeSet([[0.0, path.tau]], (0.0, path.tau)))
    np.testing.assert_allclose(full.intervals, [[0.0, F1.total]])


# ---------------------------------------------------------------------------
# local clock exponent and diffusivity


def _table(f, t):
    return ClockProcess.from_table(t, f(t))


def test_local_exponent_exact_on_power_laws():
    t = np.linspace(0, 1, 2**16 + 1)
    r = 2.0 ** -np.arange(3, 12)
    lin = local_clock_exponent(_table(lambda x: x, t), 0.5, r)
    assert lin.value == pytest.approx(1.0, abs=1e-9)
    sq = local_clock_exponent(_table(lambda x: x**2, t), 0.0, r, side="above")
    assert sq.value == pytest.approx(2.0, abs=1e-3)
    assert sq.side == "from-above"


def test_local_exponent_errors():
    F = _table(lambda x: x, np.linspace(0, 1, 1025))
    r = 2.0 ** -np.arange(2, 9)
    with pytest.raises(RangeError):
        local_clock_exponent(F, 0.1, r)
    with pytest.raises(ConfigurationError):
        local_clock_exponent(F, 0.5, 2.0 ** -np.arange(2, 4))
    with pytest.raises(ConfigurationError):
        local_clock_exponent(F, 0.5, r, side="sideways")
    assert clone(LocalClockExponent(r)).get_params()["side"] == "two-sided"


def test_diffusivity_exact_on_power_law():
    t = np.linspace(0, 1, 2**14 + 1)
    pos = np.column_stack([t**0.3, 0 * t])
    est = diffusivity(t, pos, 2.0 ** -np.arange(1, 10))
    assert est.value == pytest.approx(0.3, abs=1e-3)
    lim = diffusivity(t, pos, 2.0 ** -np.arange(1, 10), envelope=False)
    assert lim.value == pytest.approx(0.3, abs=1e-9)


def test_diffusivity_of_brownian_motion():
    vals = []
    for s in range(20):
        p = sample_path(1e-6, seed=s)
        t = 2.0 ** np.arange(-16, -5)
        t = t[t < p.tau]
        vals.append(diffusivity(p.times[: p.tau_index + 1], p.positions[: p.tau_index + 1], t).value)
    assert np.mean(vals) == pytest.approx(0.5, abs=0.1)


def test_diffusivity_errors():
    t = np.linspace(0, 1, 1025)
    pos = np.column_stack([t, t])
    with pytest.raises(ConfigurationError):
        diffusivity(t, pos, [1e-5, 1e-3, 1e-1])
    with pytest.raises(RangeError):
        diffusivity(t, pos, [0.01, 0.1, 2.0])


def test_combine_estimates():
    ests = [ExponentEstimate(v, 0.0, (1.0, 0.1), 1.0) for v in (0.5, 0.6, 0.7)]
    assert combine_estimates(ests).value == pytest.approx(0.6)
    m = combine_estimates(ests, how="mean")
    assert m.value == pytest.approx(0.6) and m.stderr == pytest.approx(0.1 / math.sqrt(3))


# ---------------------------------------------------------------------------
# Hölder event sets


def test_holder_fractions_gamma_zero(lbm_pair):
    # F is the identity: the upper bound always holds and the lower one fails only
    # where (t + r) ^ tau truncates the increment, i.e. within 2^-N of tau
    path, field = lbm_pair
    F0 = clock_process(path, field, 0.0, 0.04)
    mu = time_measure(clock_process(path, field, 1.0, 0.04))
    for N in (6, 9):
        lower, upper = holder_set_fraction(mu, F0, 0.1, N, alpha=1.0)
        assert upper == 1.0
        tail = mu.mass(path.tau - 2.0**-N, path.tau) / mu.total
        assert 1.0 - tail <= lower < 1.0
        assert lower >= 1.0 - tail


def test_holder_fraction_errors(lbm_pair):
    path, field = lbm_pair
    F0 = clock_process(path, field, 0.0, 0.04)
    mu = time_measure(F0)
    with pytest.raises(RangeError):
        holder_set_fraction(mu, F0, 0.0, 6, alpha=0.0)
    with pytest.raises(ConfigurationError):
        holder_set_fraction(mu, F0, 0.1, 20, alpha=0.0)


def test_holder_image_bound():
    x = np.linspace(0, 1, 2**14 + 1)
    unit = TimeSet([[0.0, 1.0]], (0, 1))
    rep = holder_image_bound_check((x, x), unit, 1.0, (2.0**-12, 2.0**-4))
    assert rep.holds and rep.dim_image.value == pytest.approx(rep.dim_set.value)
    C = cantor_set(10)
    rep = holder_image_bound_check((x, np.sqrt(x)), C, 0.5, (3.0**-9, 3.0**-2))
    assert rep.holds and rep.bound == pytest.approx(2 * rep.dim_set.value)
    with pytest.raises(ConfigurationError):
        holder_image_bound_check((x, -x), unit, 1.0, (2.0**-12, 2.0**-4))
