"""Regularised Liouville clocks, their inverses, and the induced time measures."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from ._validation import (
    ConfigurationError,
    DomainError,
    RangeError,
    check_exponent_parameter,
)
from .field import circle_averages


def anchor_stride(eps, dt):
    """Steps between circle-average evaluations: largest ``k`` with ``k dt <= (eps/8)^2``."""
    return max(1, int(math.floor((eps / 8.0) ** 2 / dt * (1 + 1e-12))))


@dataclass(frozen=True, eq=False)
class ClockProcess:
    """A nondecreasing clock ``F`` tabulated at path knots.

    ``values`` is the working clock (the smallest-eps level for a ladder).
    ``levels`` keeps one row per eps in ``eps_ladder`` (decreasing), and
    ``cauchy_diffs[k]`` is the sup-norm gap between rows ``k`` and ``k+1``.
    """

    times: np.ndarray
    values: np.ndarray
    gamma: float | None = None
    eps_ladder: tuple = ()
    levels: np.ndarray | None = None
    cauchy_diffs: tuple = ()
    converging: bool = True
    strides: tuple = ()
    path: object = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1 or t.size < 2:
            raise ConfigurationError("times and values must be matching 1-d arrays")
        if np.any(np.diff(t) <= 0):
            raise ConfigurationError("clock knots must be strictly increasing")
        if not np.all(np.isfinite(v)) or np.any(np.diff(v) < 0):
            raise ConfigurationError("clock values must be finite and nondecreasing")
        for name, arr in (("times", t), ("values", v)):
            arr = arr.copy() if arr.flags.writeable else arr
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def from_table(cls, times, values, path=None):
        """Wrap an arbitrary monotone table, e.g. an analytic clock."""
        return cls(np.asarray(times, float), np.asarray(values, float), path=path)

    @property
    def total(self):
        return float(self.values[-1])

    @property
    def tau(self):
        return float(self.times[-1])

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if np.any(t < self.times[0]) or np.any(t > self.times[-1]):
            raise RangeError(f"path time outside [{self.times[0]}, {self.times[-1]}]")
        return np.interp(t, self.times, self.values)

    def inverse(self, s):
        return inverse_clock(self, s)

    def manifest(self):
        return {
            "gamma": self.gamma,
            "eps_ladder": list(self.eps_ladder),
            "cauchy_diffs": list(self.cauchy_diffs),
            "converging": self.converging,
            "anchor_strides": list(self.strides),
            "limit_policy": "smallest eps level; sup-norm Cauchy gaps reported, no extrapolation",
        }


def _check_path(path):
    if not path.exited:
        raise ConfigurationError("the path never left its disc; the clock needs tau")


def _clock_values(path, field, gamma, eps):
    times = path.times
    k = path.tau_index
    if gamma == 0.0:
        return times.copy(), 1
    stride = anchor_stride(eps, path.dt)
    anchors = np.arange(0, k, stride)
    pts = path.positions[anchors]
    dist = field.domain.boundary_distance(pts)
    bad = np.nonzero(dist < eps)[0]
    if bad.size:
        raise DomainError(
            f"path step {int(anchors[bad[0]])} lies within {eps:g} of the domain boundary"
        )
    h = circle_averages(field, pts, eps)
    v = field.domain.circle_variance(pts, eps)
    w_anchor = np.exp(gamma * h - 0.5 * gamma**2 * v)
    w = np.repeat(w_anchor, stride)[:k]
    F = np.zeros(k + 1)
    np.cumsum(w * np.diff(times), out=F[1:])
    return F, stride


def clock_process(path, field, gamma, eps):
    """Regularised clock ``F_{gamma,eps}`` along ``path`` through ``field``.

    ``F(t_i) = sum_{j<i} exp(gamma h_eps(B_j) - gamma^2/2 v_eps(B_j)) (t_{j+1} - t_j)``
    with ``v_eps = log(1/eps) + log C(B_j)``; circle averages are taken on
    anchors every ``anchor_stride(eps, dt)`` steps and held in between.
    """
    return clock_limit(path, field, gamma, [eps])


def clock_limit(path, field, gamma, eps_ladder):
    """Clocks for every eps in the ladder, with the smallest eps as the limit."""
    gamma = check_exponent_parameter(gamma, "gamma")
    _check_path(path)
    ladder = sorted({float(e) for e in eps_ladder}, reverse=True)
    if not ladder or ladder[-1] <= 0:
        raise ConfigurationError("eps ladder must contain positive radii")
    rows, strides = [], []
    for eps in ladder:
        F, stride = _clock_values(path, field, gamma, eps)
        rows.append(F)
        strides.append(stride)
    levels = np.vstack(rows)
    diffs = tuple(float(np.max(np.abs(levels[i] - levels[i + 1]))) for i in range(len(ladder) - 1))
    converging = len(diffs) < 2 or diffs[-1] < diffs[-2] or diffs[-1] == 0.0
    if not converging:
        warnings.warn("Cauchy gaps did not decrease over the last two eps levels", RuntimeWarning)
    return ClockProcess(
        times=path.times,
        values=levels[-1],
        gamma=gamma,
        eps_ladder=tuple(ladder),
        levels=levels,
        cauchy_diffs=diffs,
        converging=bool(converging),
        strides=tuple(strides),
        path=path,
    )


def _generalized_inverse(knots, cum, target):
    # left-continuous inverse inf{t : cum(t) >= target}, linear within knots
    target = np.asarray(target, dtype=float)
    j = np.searchsorted(cum, target, side="left")
    zero = target <= cum[0]
    jz = np.searchsorted(cum, cum[0], side="right")
    j = np.where(zero, jz, j)
    j = np.clip(j, 1, len(cum) - 1)
    lo, hi = cum[j - 1], cum[j]
    gap = hi - lo
    frac = np.where(gap > 0, (target - lo) / np.where(gap > 0, gap, 1.0), 0.0)
    frac = np.where(zero, 0.0, np.clip(frac, 0.0, 1.0))
    return knots[j - 1] + frac * (knots[j] - knots[j - 1])


def inverse_clock(F, s):
    """Path time ``F^{-1}(s)`` by linear interpolation; exact at knots."""
    s_arr = np.asarray(s, dtype=float)
    lo, hi = F.values[0], F.values[-1]
    if np.any(~np.isfinite(s_arr)) or np.any(s_arr < lo) or np.any(s_arr > hi):
        raise RangeError(f"clock time outside [{lo}, {hi}]")
    out = _generalized_inverse(F.times, F.values, s_arr)
    hit = np.searchsorted(F.values, s_arr, side="left")
    hit = np.clip(hit, 0, len(F.values) - 1)
    out = np.where(F.values[hit] == s_arr, F.times[hit], out)
    return float(out) if np.ndim(s) == 0 else out


def lbm_trajectory(path, F, sample_times):
    """Liouville Brownian motion ``Z_s = B_{F^{-1}(s)}`` at the given clock times."""
    return path.position_at(inverse_clock(F, np.asarray(sample_times, dtype=float)))


@dataclass(frozen=True, eq=False)
class TimeMeasure:
    """Measure on path time with mass ``increments[i]`` spread uniformly on ``[knots[i], knots[i+1]]``.

    Knots may repeat, which encodes atoms. ``exponent`` is the coupling of
    the clock the measure came from, when known.
    """

    knots: np.ndarray
    increments: np.ndarray
    exponent: float | None = None

    def __post_init__(self):
        knots = np.asarray(self.knots, dtype=float)
        inc = np.asarray(self.increments, dtype=float)
        if knots.ndim != 1 or inc.shape != (knots.size - 1,):
            raise ConfigurationError("need one increment per knot interval")
        if np.any(np.diff(knots) < 0):
            raise ConfigurationError("knots must be nondecreasing")
        if np.any(inc < 0) or not np.all(np.isfinite(inc)):
            raise ConfigurationError("increments must be finite and nonnegative")
        object.__setattr__(self, "knots", knots)
        object.__setattr__(self, "increments", inc)

    @property
    def total(self):
        return float(self.increments.sum())

    @property
    def cumulative(self):
        cum = np.zeros(self.knots.size)
        np.cumsum(self.increments, out=cum[1:])
        return cum

    def cdf(self, t):
        cum = self.cumulative
        if self.total <= 0:
            raise ConfigurationError("measure has zero mass")
        return np.interp(t, self.knots, cum) / cum[-1]

    def mass(self, a, b):
        """Mass of ``[a, b]`` (linear interpolation inside a knot interval)."""
        cum = self.cumulative
        return float(np.interp(b, self.knots, cum) - np.interp(a, self.knots, cum))

    def mass_of(self, timeset):
        return sum(self.mass(a, b) for a, b in timeset.intervals)

    def quantile(self, mass):
        """Path time at which the cumulative mass first reaches ``mass``."""
        return _generalized_inverse(self.knots, self.cumulative, mass)


def time_measure(F):
    """The measure ``mu([t_i, t_{i+1}]) = F(t_{i+1}) - F(t_i)``."""
    return TimeMeasure(F.times, np.diff(F.values), exponent=F.gamma)


UNIFORM_MASS = "uniform-mass"
EXPONENTIAL_CLOCK = "exponential-clock"


def sample_time(mu, mode, u):
    """Draw a path time from ``mu`` given a uniform variate ``u``.

    ``uniform-mass`` returns the ``u``-quantile of ``mu / |mu|``.
    ``exponential-clock`` sets ``T = -log(1 - u)`` (an Exp(1) clock time) and
    returns ``F^{-1}(T)``, or ``None`` when ``T`` exceeds the total mass.
    """
    total = mu.total
    if not total > 0:
        raise ConfigurationError("cannot sample from a measure with zero mass")
    if not 0.0 <= u <= 1.0:
        raise RangeError(f"u must lie in [0, 1], got {u}")
    if mode == UNIFORM_MASS:
        target = u * total
    elif mode == EXPONENTIAL_CLOCK:
        if u >= 1.0:
            return None
        target = -math.log1p(-u)
        if target > total:
            return None
    else:
        raise ConfigurationError(f"unknown sampling mode {mode!r}")
    return float(mu.quantile(target))
