"""Exponent estimators, thick-time sets, and closed-form multifractal exponents.

The regression estimators follow the scikit-learn estimator convention:
hyperparameters in ``__init__``, ``fit`` returns ``self``, fitted results in
trailing-underscore attributes. Each has a functional shortcut returning an
:class:`ExponentEstimate`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy import stats
from sklearn.base import BaseEstimator

from ._validation import ConfigurationError, RangeError, check_exponent_parameter
from .field import geometric_radii, ladder_averages

REPORTABLE_DECADES = 1.5
ABOVE, BELOW, TWO_SIDED = "from-above", "from-below", "two-sided"
_SIDES = {"above": ABOVE, "below": BELOW, "two-sided": TWO_SIDED,
          ABOVE: ABOVE, BELOW: BELOW}


@dataclass(frozen=True)
class ExponentEstimate:
    value: float
    stderr: float
    scales: tuple
    r2: float
    side: str | None = None
    estimator: str = ""
    intercept: float = 0.0

    @property
    def decades(self):
        s = np.asarray(self.scales, dtype=float)
        return float(np.log10(s.max() / s.min())) if s.size else 0.0

    @property
    def reportable(self):
        return self.decades >= REPORTABLE_DECADES - 1e-9


def _fit_loglog(x, y, scales, side=None, estimator=""):
    """Least-squares slope of ``y`` on ``x`` with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3 or np.ptp(x) == 0:
        raise ConfigurationError("degenerate ladder: need at least 3 distinct scales")
    if not np.all(np.isfinite(y)):
        raise ConfigurationError("regression ordinates must be finite")
    res = stats.linregress(x, y)
    stderr = float(res.stderr) if np.isfinite(res.stderr) else 0.0
    r2 = float(res.rvalue**2) if np.isfinite(res.rvalue) else 1.0
    return ExponentEstimate(
        value=float(res.slope),
        stderr=stderr,
        scales=tuple(float(s) for s in scales),
        r2=r2,
        side=side,
        estimator=estimator,
        intercept=float(res.intercept),
    )


def _check_span(scales, min_decades):
    scales = np.asarray(scales, dtype=float)
    if np.any(scales <= 0):
        raise ConfigurationError("scales must be positive")
    span = math.log10(scales.max() / scales.min())
    if span < min_decades - 1e-9:
        raise ConfigurationError(f"scales span {span:.2f} decades, need {min_decades}")


def dyadic_scales(lo, hi):
    """``hi, hi/2, hi/4, ...`` down to ``lo`` (inclusive up to rounding)."""
    if not 0 < lo <= hi:
        raise ConfigurationError(f"need 0 < lo <= hi, got {lo}, {hi}")
    k = int(math.floor(math.log2(hi / lo) + 1e-9))
    return hi * 2.0 ** -np.arange(k + 1)


# ---------------------------------------------------------------------------
# time sets


@dataclass(frozen=True, eq=False)
class TimeSet:
    """Finite union of sorted, disjoint closed intervals inside ``ambient``.

    Points are degenerate intervals. ``resolution`` is the grid spacing the
    set was built on (finest meaningful box scale), if any.
    """

    intervals: np.ndarray
    ambient: tuple
    tag: str = "custom"
    resolution: float | None = None
    params: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        iv = np.asarray(self.intervals, dtype=float).reshape(-1, 2)
        lo, hi = map(float, self.ambient)
        if np.any(iv[:, 1] < iv[:, 0]):
            raise ConfigurationError("interval endpoints out of order")
        if len(iv) > 1 and np.any(iv[1:, 0] <= iv[:-1, 1]):
            raise ConfigurationError("intervals must be sorted and disjoint")
        if len(iv) and (iv[0, 0] < lo - 1e-12 or iv[-1, 1] > hi + 1e-12):
            raise ConfigurationError("intervals must lie inside the ambient interval")
        iv.setflags(write=False)
        object.__setattr__(self, "intervals", iv)
        object.__setattr__(self, "ambient", (lo, hi))

    @classmethod
    def from_mask(cls, times, mask, ambient, tag="custom", resolution=None, params=None):
        """Merge runs of consecutive selected grid times into closed intervals."""
        times = np.asarray(times, dtype=float)
        mask = np.asarray(mask, dtype=bool)
        if times.shape != mask.shape:
            raise ConfigurationError("times and mask must have the same shape")
        padded = np.concatenate([[False], mask, [False]]).astype(np.int8)
        edges = np.diff(padded)
        starts = np.nonzero(edges == 1)[0]
        stops = np.nonzero(edges == -1)[0] - 1
        iv = np.column_stack([times[starts], times[stops]])
        return cls(iv, ambient, tag, resolution, dict(params or {}))

    @classmethod
    def from_points(cls, points, ambient, tag="custom", resolution=None):
        pts = np.unique(np.asarray(points, dtype=float))
        return cls(np.column_stack([pts, pts]), ambient, tag, resolution)

    @property
    def empty(self):
        return len(self.intervals) == 0

    def __len__(self):
        return len(self.intervals)

    @property
    def lebesgue(self):
        return float(np.sum(self.intervals[:, 1] - self.intervals[:, 0]))

    def translated(self, shift):
        lo, hi = self.ambient
        return TimeSet(self.intervals + shift, (lo + shift, hi + shift), self.tag,
                       self.resolution, self.params)

    def scaled(self, factor):
        lo, hi = self.ambient
        res = None if self.resolution is None else self.resolution * factor
        return TimeSet(self.intervals * factor, (lo * factor, hi * factor), self.tag, res, self.params)


def cantor_set(depth, lo=0.0, hi=1.0):
    """Middle-thirds Cantor construction after ``depth`` steps."""
    iv = np.array([[lo, hi]])
    for _ in range(depth):
        w = (iv[:, 1] - iv[:, 0]) / 3.0
        iv = np.column_stack([
            np.column_stack([iv[:, 0], iv[:, 0] + w]),
            np.column_stack([iv[:, 1] - w, iv[:, 1]]),
        ]).reshape(-1, 2)
    return TimeSet(iv, (lo, hi), "cantor", resolution=(hi - lo) / 3.0**depth)


def _snap(u, tol=1e-9):
    # endpoints that sit on a box edge up to rounding count as on the edge, so
    # counts do not change under translation or exact rescaling
    r = np.rint(u)
    return np.where(np.abs(u - r) <= tol * np.maximum(1.0, np.abs(u)), r, u)


def box_counts(S, scales):
    """Number of ``delta``-boxes, anchored at ``min(S)``, meeting ``S``."""
    iv = S.intervals
    a0 = iv[0, 0]
    out = np.empty(len(scales), dtype=np.int64)
    for k, delta in enumerate(scales):
        ka = np.floor(_snap((iv[:, 0] - a0) / delta)).astype(np.int64)
        kb = np.floor(_snap((iv[:, 1] - a0) / delta)).astype(np.int64)
        out[k] = np.sum(kb - ka + 1) - np.count_nonzero(ka[1:] == kb[:-1])
    return out


class BoxCountingDimension(BaseEstimator):
    """Box-counting dimension of a :class:`TimeSet` (upper-bound proxy for Hausdorff).

    Parameters
    ----------
    scale_range : (lo, hi)
        Box sizes ``hi * 2**-k >= lo`` are used. Defaults to
        ``(4 * resolution, extent / 4)``.
    """

    def __init__(self, scale_range=None):
        self.scale_range = scale_range

    def fit(self, S, y=None):
        if S.empty:
            raise ConfigurationError("cannot estimate the dimension of an empty set")
        if self.scale_range is None:
            extent = S.ambient[1] - S.ambient[0]
            if S.resolution is None:
                raise ConfigurationError("scale_range is required for sets without a resolution")
            lo, hi = 4.0 * S.resolution, extent / 4.0
        else:
            lo, hi = map(float, self.scale_range)
        if S.resolution is not None and lo < S.resolution * (1 - 1e-9):
            raise ConfigurationError(f"smallest box {lo:g} is below the set resolution {S.resolution:g}")
        if not 0 < lo < hi:
            raise ConfigurationError(f"invalid box-scale range ({lo}, {hi})")
        scales = dyadic_scales(lo, hi)
        if scales.size < 3:
            raise ConfigurationError("box-scale range too narrow: need at least 3 dyadic scales")
        counts = box_counts(S, scales)
        self.scales_ = scales
        self.counts_ = counts
        self.estimate_ = _fit_loglog(np.log(1.0 / scales), np.log(counts), scales,
                                     estimator="box (upper bound proxy)")
        self.value_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        self.r2_ = self.estimate_.r2
        return self


def box_dimension(S, scale_range=None):
    return BoxCountingDimension(scale_range).fit(S).estimate_


# ---------------------------------------------------------------------------
# thickness


class ThicknessEstimator(BaseEstimator):
    """Slope of ``h_eps(z)`` against ``log(1/eps)`` along a circle-average ladder."""

    def __init__(self, min_decades=REPORTABLE_DECADES):
        self.min_decades = min_decades

    def fit(self, ladder, y=None):
        radii = np.asarray(ladder.radii, dtype=float)
        if radii.size < 3:
            raise ConfigurationError("degenerate ladder: need at least 3 radii")
        _check_span(radii, self.min_decades)
        self.estimate_ = _fit_loglog(np.log(1.0 / radii), ladder.averages, radii, estimator="thickness")
        self.value_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        self.r2_ = self.estimate_.r2
        return self


def thickness(ladder, min_decades=REPORTABLE_DECADES):
    return ThicknessEstimator(min_decades).fit(ladder).estimate_


DEFAULT_THICK_WINDOW = (0.01, 0.32)


def thickness_slopes(averages, radii):
    """Row-wise least-squares slopes of ``averages`` against ``log(1/radii)``."""
    x = np.log(1.0 / np.asarray(radii, dtype=float))
    xc = x - x.mean()
    return (np.asarray(averages) @ xc) / (xc @ xc)


def thick_time_set(path, field, alpha, tol=0.25, eps_ladder=None, stride=1):
    """Grid times ``t_i`` (every ``stride`` steps) with thickness at ``B_{t_i}`` within ``tol`` of ``alpha``.

    The thickness at each sampled point is the regression slope over
    ``eps_ladder`` (default radii ``0.32 * 2**-k`` down to 0.01). Runs of
    consecutive selected grid times are merged into closed intervals;
    membership is boundary inclusive.
    """
    if not path.exited:
        raise ConfigurationError("thick-time sets need an exited path")
    if int(stride) != stride or stride < 1:
        raise ConfigurationError(f"stride must be a positive integer, got {stride}")
    radii = (geometric_radii(DEFAULT_THICK_WINDOW[1], DEFAULT_THICK_WINDOW[0], 0.5)
             if eps_ladder is None else np.sort(np.asarray(eps_ladder, float))[::-1])
    idx = np.arange(0, path.tau_index, int(stride))
    times = path.times[idx]
    slopes = thickness_slopes(ladder_averages(field, path.positions[idx], radii), radii)
    mask = np.abs(slopes - alpha) <= tol
    return TimeSet.from_mask(
        times, mask, (0.0, path.tau), tag="thick-times",
        resolution=stride * path.dt, params={"alpha": alpha, "tol": tol},
    )


def clock_image(F, S):
    """Image of ``S`` under the increasing map ``F`` (interval endpoints mapped)."""
    lo, hi = S.ambient
    if lo < F.times[0] - 1e-12 or hi > F.times[-1] + 1e-12:
        raise RangeError("time set is not inside the clock's domain")
    iv = np.interp(S.intervals, F.times, F.values) if len(S) else np.zeros((0, 2))
    amb = tuple(np.interp([lo, hi], F.times, F.values))
    res = None
    if S.resolution is not None:
        res = S.resolution * (F.total / (F.times[-1] - F.times[0]))
    if len(iv) > 1:
        touching = iv[1:, 0] <= iv[:-1, 1]
        if np.any(touching):
            # only possible if F is numerically flat between two intervals
            keep = np.concatenate([[True], ~touching])
            groups = np.cumsum(keep) - 1
            merged = np.empty((groups[-1] + 1, 2))
            merged[:, 0] = iv[keep, 0]
            merged[:, 1] = np.maximum.reduceat(iv[:, 1], np.nonzero(keep)[0])
            iv = merged
    return TimeSet(iv, amb, tag="clock-image", resolution=res, params=dict(S.params, source=S.tag))


# ---------------------------------------------------------------------------
# local clock exponent and diffusivity


class LocalClockExponent(BaseEstimator):
    """Slope of ``log |F(t +- r) - F(t)|`` against ``log r``.

    ``side='two-sided'`` takes the larger of the forward and backward
    increments at each ``r``.
    """

    def __init__(self, r_ladder, side="two-sided", min_decades=REPORTABLE_DECADES):
        self.r_ladder = r_ladder
        self.side = side
        self.min_decades = min_decades

    def fit(self, F, t):
        side = _SIDES.get(self.side)
        if side is None:
            raise ConfigurationError(f"unknown side {self.side!r}")
        r = np.sort(np.asarray(self.r_ladder, dtype=float))
        if r.size < 3:
            raise ConfigurationError("degenerate ladder: need at least 3 lags")
        _check_span(r, self.min_decades)
        step = F.times[1] - F.times[0]
        if r[0] < step * (1 - 1e-9):
            raise ConfigurationError(f"smallest lag {r[0]:g} is below the grid step {step:g}")
        t0, t1 = F.times[0], F.times[-1]
        need_up = side in (ABOVE, TWO_SIDED)
        need_down = side in (BELOW, TWO_SIDED)
        if (need_up and t + r[-1] > t1 + 1e-12) or (need_down and t - r[-1] < t0 - 1e-12):
            raise RangeError(f"lag ladder around t={t:g} leaves [{t0:g}, {t1:g}]")
        Ft = np.interp(t, F.times, F.values)
        inc = np.zeros_like(r)
        if need_up:
            inc = np.maximum(inc, np.abs(np.interp(t + r, F.times, F.values) - Ft))
        if need_down:
            inc = np.maximum(inc, np.abs(Ft - np.interp(t - r, F.times, F.values)))
        if np.any(inc <= 0):
            raise ConfigurationError("clock increment vanishes on the ladder")
        self.increments_ = inc
        self.estimate_ = _fit_loglog(np.log(r), np.log(inc), r, side=side, estimator="local clock exponent")
        self.value_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        self.r2_ = self.estimate_.r2
        return self


def local_clock_exponent(F, t, r_ladder, side="two-sided", min_decades=REPORTABLE_DECADES):
    return LocalClockExponent(r_ladder, side, min_decades).fit(F, t).estimate_


class DiffusivityExponent(BaseEstimator):
    """Growth exponent of ``|Z_t - Z_0|`` for small ``t``.

    With ``envelope=True`` (limsup form) the running maximum
    ``max_{s <= t} |Z_s - Z_0|`` is regressed on ``log t``; otherwise the
    displacement at ``t`` itself (lim form).
    """

    def __init__(self, t_ladder, envelope=True, min_decades=REPORTABLE_DECADES):
        self.t_ladder = t_ladder
        self.envelope = envelope
        self.min_decades = min_decades

    def fit(self, times, positions):
        times = np.asarray(times, dtype=float)
        pos = np.asarray(positions, dtype=float)
        t = np.sort(np.asarray(self.t_ladder, dtype=float))
        if t.size < 3:
            raise ConfigurationError("degenerate ladder: need at least 3 times")
        _check_span(t, self.min_decades)
        resolution = np.min(np.diff(times)[np.diff(times) > 0]) if times.size > 1 else np.inf
        if t[0] < times[0] + resolution * (1 - 1e-9):
            raise ConfigurationError(f"ladder time {t[0]:g} is below the clock resolution {resolution:g}")
        if t[-1] > times[-1]:
            raise RangeError(f"ladder time {t[-1]:g} exceeds the trajectory horizon {times[-1]:g}")
        disp = np.hypot(*(pos - pos[0]).T)
        if self.envelope:
            disp = np.maximum.accumulate(disp)
            k = np.searchsorted(times, times[0] + t, side="right") - 1
            vals = disp[k]
        else:
            vals = np.hypot(np.interp(times[0] + t, times, pos[:, 0]) - pos[0, 0],
                            np.interp(times[0] + t, times, pos[:, 1]) - pos[0, 1])
        if np.any(vals <= 0):
            raise ConfigurationError("zero displacement on the ladder")
        self.displacements_ = vals
        name = "diffusivity (limsup)" if self.envelope else "diffusivity (lim)"
        self.estimate_ = _fit_loglog(np.log(t), np.log(vals), t, estimator=name)
        self.value_ = self.estimate_.value
        self.stderr_ = self.estimate_.stderr
        self.r2_ = self.estimate_.r2
        return self


def diffusivity(times, positions, t_ladder, envelope=True, min_decades=REPORTABLE_DECADES):
    """Diffusivity exponent of a trajectory sampled at clock ``times``."""
    return DiffusivityExponent(t_ladder, envelope, min_decades).fit(times, positions).estimate_


def combine_estimates(estimates, how="median"):
    """Aggregate per-replica estimates into one (median or mean, with s.e. of the mean)."""
    vals = np.array([e.value for e in estimates], dtype=float)
    if vals.size == 0:
        raise ConfigurationError("nothing to combine")
    center = float(np.median(vals) if how == "median" else np.mean(vals))
    se = float(np.std(vals, ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    if how == "median":
        se *= math.sqrt(math.pi / 2)
    first = estimates[0]
    return ExponentEstimate(center, se, first.scales, float(np.mean([e.r2 for e in estimates])),
                            first.side, f"{first.estimator} [{how} of {vals.size}]")


# ---------------------------------------------------------------------------
# closed forms


def formula_beta(alpha, gamma):
    """Local clock exponent ``1 - alpha gamma / 2 + gamma^2 / 4``."""
    a = check_exponent_parameter(alpha, "alpha")
    g = check_exponent_parameter(gamma, "gamma")
    return 1.0 - a * g / 2.0 + g * g / 4.0


def formula_time_dimension(alpha, gamma):
    """Dimension of the clock image of the alpha-thick times."""
    a = check_exponent_parameter(alpha, "alpha")
    return (1.0 - a * a / 4.0) / formula_beta(alpha, gamma)


def formula_thick_dimension(alpha):
    """Dimension ``max(0, 2 - alpha^2 / 2)`` of the alpha-thick points; defined up to alpha = 2."""
    if isinstance(alpha, bool) or not isinstance(alpha, (int, float)) or not 0 <= alpha <= 2:
        raise RangeError(f"alpha must lie in [0, 2], got {alpha!r}")
    return max(0.0, 2.0 - alpha * alpha / 2.0)


def formula_diffusivity(alpha, gamma):
    """Diffusivity exponent ``1 / (2 - alpha gamma + gamma^2 / 2)``."""
    a = check_exponent_parameter(alpha, "alpha")
    g = check_exponent_parameter(gamma, "gamma")
    return 1.0 / (2.0 - a * g + g * g / 2.0)


# ---------------------------------------------------------------------------
# Hölder-type event sets


def holder_set_fraction(mu_ref, F_target, delta, N, alpha=None, stride=1):
    """``mu_ref``-mass fractions of the lower and upper Hölder event sets of ``F_target``.

    A grid time ``t`` is in the lower set when
    ``mu([t, (t+r) ^ tau]) >= r^(beta+delta)`` and in the upper set when
    ``mu([t, (t+r) ^ tau]) <= r^(beta-delta)``, for every dyadic
    ``r in [4 dt, 2^-N)``, where ``mu`` is the measure of ``F_target`` and
    ``beta = formula_beta(alpha, gamma)``. ``alpha`` defaults to the exponent
    recorded on ``mu_ref``.

    Returns
    -------
    (float, float)
        Fractions of ``mu_ref``'s mass in the lower and upper sets.
    """
    if not delta > 0:
        raise RangeError(f"delta must be positive, got {delta}")
    if alpha is None:
        alpha = mu_ref.exponent
    if alpha is None or F_target.gamma is None:
        raise ConfigurationError("alpha and gamma must be known to form beta")
    beta = formula_beta(alpha, F_target.gamma)
    times = F_target.times
    dt = times[1] - times[0]
    top = 2.0**-N
    if top < 4 * dt:
        raise ConfigurationError(f"2^-{N} = {top:g} is below 4 dt = {4 * dt:g}")
    if mu_ref.knots.shape != times.shape or np.any(mu_ref.knots != times):
        raise ConfigurationError("reference measure and clock must share knots")
    r = 4 * dt * 2.0 ** np.arange(int(math.floor(math.log2(top / (4 * dt)) - 1e-12)) + 1)
    r = r[r < top]
    idx = np.arange(0, len(times) - 1, int(stride))
    t = times[idx]
    tau = times[-1]
    lower = np.ones(idx.size, dtype=bool)
    upper = np.ones(idx.size, dtype=bool)
    Ft = F_target.values[idx]
    for rk in r:
        gain = np.interp(np.minimum(t + rk, tau), times, F_target.values) - Ft
        lower &= gain >= rk ** (beta + delta)
        upper &= gain <= rk ** (beta - delta)
    w = np.add.reduceat(mu_ref.increments, idx) if stride > 1 else mu_ref.increments
    total = w.sum()
    if not total > 0:
        raise ConfigurationError("reference measure has zero mass")
    return float(w[lower].sum() / total), float(w[upper].sum() / total)


@dataclass(frozen=True)
class HolderImageReport:
    dim_set: ExponentEstimate
    dim_image: ExponentEstimate
    beta: float
    bound: float
    holds: bool


def holder_image_bound_check(table, E, beta, scale_range=None, image_scale_range=None):
    """Check ``dim f(E) <= dim E / beta`` with box-counting estimates.

    ``table`` is ``(x, f(x))`` for an increasing ``f``. The bound passes if the
    image dimension is at most ``dim E / beta`` plus the combined standard
    error.
    """
    x, fx = (np.asarray(a, dtype=float) for a in table)
    if x.shape != fx.shape or x.ndim != 1 or np.any(np.diff(x) <= 0):
        raise ConfigurationError("table abscissae must be strictly increasing")
    if np.any(np.diff(fx) < 0):
        raise ConfigurationError("f is not monotone on its table")
    if not beta > 0:
        raise RangeError(f"beta must be positive, got {beta}")
    lo, hi = E.ambient
    if lo < x[0] - 1e-12 or hi > x[-1] + 1e-12:
        raise RangeError("E is not inside the table's domain")
    image = TimeSet(np.interp(E.intervals, x, fx), tuple(np.interp([lo, hi], x, fx)), "image")
    dim_e = box_dimension(E, scale_range)
    dim_f = box_dimension(image, image_scale_range or scale_range)
    bound = dim_e.value / beta
    slack = math.hypot(dim_e.stderr, dim_f.stderr)
    return HolderImageReport(dim_e, dim_f, float(beta), bound, bool(dim_f.value <= bound + slack))
