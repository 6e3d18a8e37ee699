"""Monte-Carlo checks of moment bounds, tail bounds, and covariance identities.

The moment and tail functionals integrate the white-noise field ``Y_eps``
along a Brownian path stopped at radius 1/2::

    I = int_0^tau  exp(gamma Y_eps(B_s) - gamma^2/2 E[Y_eps^2]) / (|B_s| + eps)^(alpha gamma) ds
    J = the same integral over [0, 1 ^ tau]

with ``Y_eps`` sampled on path anchors by dense factorisation.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field as dc_field
from functools import partial

import numpy as np
import statsmodels.api as sm
from statsmodels.stats.proportion import proportion_confint

from ._validation import ConfigurationError, RangeError, check_exponent_parameter, check_point
from .field import (
    DomainSpec,
    build_gff,
    build_y_field,
    circle_averages,
    exact_circle_covariance,
    sup_harmonic,
    y_covariance,
)
from .path import sample_path
from .seeding import SCHEME, child_seed, map_replicas

ANCHOR_CAP = 4000
MOMENT_DT = 1e-4
TAIL_EPS = 0.05
SLACK = 0.3
MIN_HITS = 5
Z95 = 1.959963984540054


def _seeds_record(master, streams):
    return {"master": int(master), "scheme": SCHEME, "streams": list(streams)}


# ---------------------------------------------------------------------------
# path functionals of Y


def _anchor_grid(path, cap=ANCHOR_CAP):
    k = path.tau_index
    stride = max(1, math.ceil(k / cap))
    idx = np.arange(0, k, stride)
    starts = path.times[idx]
    ends = np.append(starts[1:], path.tau)
    return idx, starts, ends


def _moment_replica(index, gamma, alpha, eps_levels, dt, master):
    path = sample_path(dt, seed=child_seed(master, "moment-path", index))
    idx, starts, ends = _anchor_grid(path)
    pts = path.positions[idx]
    full = ends - starts
    unit = np.clip(np.minimum(ends, 1.0) - starts, 0.0, None)
    radius = np.hypot(pts[:, 0], pts[:, 1])
    fseed = child_seed(master, "moment-field", index)
    out = np.empty((len(eps_levels), 2))
    for k, eps in enumerate(eps_levels):
        if gamma == 0.0:
            g = np.ones(len(idx))
        else:
            y = build_y_field(pts, eps, fseed).values
            var = math.log(1.0 / eps) + 2.0
            g = np.exp(gamma * y - 0.5 * gamma**2 * var - alpha * gamma * np.log(radius + eps))
        out[k] = g @ full, g @ unit
    return out


# tail curves and sweeps at the same parameters reuse one set of replicas
_MOMENT_CACHE = {}
_MOMENT_CACHE_SIZE = 8


def moment_samples(gamma, alpha, eps_levels, replicas, seed=0, dt=MOMENT_DT, workers=None):
    """Per-replica path integrals, shape ``(replicas, len(eps_levels), 2)``.

    ``[..., 0]`` integrates to ``tau`` and ``[..., 1]`` to ``1 ^ tau``. Paths
    and the white noise behind ``Y`` are shared across eps levels (common
    random numbers), so level differences are not masked by path noise.
    """
    gamma = check_exponent_parameter(gamma, "gamma")
    alpha = check_exponent_parameter(alpha, "alpha")
    eps_levels = [float(e) for e in eps_levels]
    for e in eps_levels:
        if not 0 < e <= 1:
            raise RangeError(f"eps must lie in (0, 1], got {e}")
    key = (gamma, alpha, tuple(eps_levels), int(replicas), int(seed), float(dt))
    if key not in _MOMENT_CACHE:
        func = partial(_moment_replica, gamma=gamma, alpha=alpha, eps_levels=eps_levels, dt=dt, master=seed)
        out = np.array(map_replicas(func, range(int(replicas)), workers))
        out.setflags(write=False)
        if len(_MOMENT_CACHE) >= _MOMENT_CACHE_SIZE:
            _MOMENT_CACHE.pop(next(iter(_MOMENT_CACHE)))
        _MOMENT_CACHE[key] = out
    return _MOMENT_CACHE[key]


@dataclass(frozen=True)
class MomentSweep:
    """Per-eps moment estimates with a paired trend test across eps."""

    lemma: str
    exponent: float
    eps: tuple
    means: tuple
    stderrs: tuple
    trend_slope: float
    trend_stderr: float
    trend_ci: tuple
    passed: bool
    replicas: int
    params: dict = dc_field(default_factory=dict)
    seeds: dict = dc_field(default_factory=dict)

    def to_report(self):
        rows = [{"eps": e, "mean": m, "stderr": s} for e, m, s in zip(self.eps, self.means, self.stderrs)]
        return {
            "lemma": self.lemma,
            "parameters": dict(self.params, exponent=self.exponent, replicas=self.replicas),
            "rows": rows,
            "fitted_slope": self.trend_slope,
            "slope_stderr": self.trend_stderr,
            "ci": list(self.trend_ci),
            "pass": self.passed,
            "seeds": self.seeds,
        }


def _trend(values, eps):
    # per-replica OLS slope against log(1/eps); replicas are independent
    x = np.log(1.0 / np.asarray(eps))
    xc = x - x.mean()
    # rows are taken relative to their first level so flat rows give exactly 0
    slopes = (values - values[:, :1]) @ xc / (xc @ xc)
    mean = float(slopes.mean())
    se = float(slopes.std(ddof=1) / math.sqrt(len(slopes))) if len(slopes) > 1 else float("inf")
    return mean, se, (mean - Z95 * se, mean + Z95 * se)


def _sweep(lemma, power, horizon, gamma, alpha, eps_ladder, replicas, seed, dt, workers):
    if replicas < 1000:
        warnings.warn(f"{replicas} replicas is below the recommended 1000", RuntimeWarning)
    eps = sorted({float(e) for e in eps_ladder}, reverse=True)
    if len(eps) < 2:
        raise ConfigurationError("a trend test needs at least two eps levels")
    samples = moment_samples(gamma, alpha, eps, replicas, seed, dt, workers)[:, :, horizon]
    vals = samples**power
    means = vals.mean(axis=0)
    ses = vals.std(axis=0, ddof=1) / math.sqrt(len(vals))
    slope, se, ci = _trend(vals, eps)
    return MomentSweep(
        lemma=lemma,
        exponent=float(power),
        eps=tuple(eps),
        means=tuple(map(float, means)),
        stderrs=tuple(map(float, ses)),
        trend_slope=slope,
        trend_stderr=se,
        trend_ci=ci,
        passed=bool(ci[0] <= 0.0),
        replicas=int(replicas),
        params={"gamma": gamma, "alpha": alpha, "dt": dt, "horizon": "tau" if horizon == 0 else "1^tau"},
        seeds=_seeds_record(seed, ["moment-path", "moment-field"]),
    )


def positive_moment_sweep(p, gamma, alpha, eps_ladder, replicas, seed=0, dt=MOMENT_DT, workers=None):
    """Estimate ``E[I^p]`` for each eps; pass when the trend CI is not entirely positive."""
    if not 0 < p < 1:
        raise RangeError(f"p must lie in (0, 1), got {p}")
    return _sweep("positive-moment", p, 0, gamma, alpha, eps_ladder, replicas, seed, dt, workers)


def negative_moment_sweep(gamma, alpha, eps_ladder, replicas, seed=0, dt=MOMENT_DT, workers=None):
    """Estimate ``E[J^-1]`` for each eps, ``J`` integrated up to ``1 ^ tau``."""
    return _sweep("negative-moment", -1.0, 1, gamma, alpha, eps_ladder, replicas, seed, dt, workers)


# ---------------------------------------------------------------------------
# tail curves


@dataclass(frozen=True)
class TailCurve:
    """Empirical tail probabilities over scales ``r`` with a weighted log-log fit."""

    lemma: str
    scales: tuple
    hits: tuple
    replicas: int
    probabilities: tuple
    ci_low: tuple
    ci_high: tuple
    slope: float
    slope_stderr: float
    intercept: float
    slope_ci: tuple
    fitted: tuple
    passed: bool
    status: str = "ok"
    params: dict = dc_field(default_factory=dict)
    seeds: dict = dc_field(default_factory=dict)

    @property
    def monotone(self):
        """Probabilities do not increase as ``r`` decreases."""
        order = np.argsort(self.scales)[::-1]
        p = np.asarray(self.probabilities)[order]
        return bool(np.all(np.diff(p) <= 0))

    def to_report(self):
        rows = [
            {"r": r, "hits": h, "p": p, "ci": [lo, hi], "fitted": f}
            for r, h, p, lo, hi, f in zip(self.scales, self.hits, self.probabilities,
                                          self.ci_low, self.ci_high, self.fitted)
        ]
        return {
            "lemma": self.lemma,
            "parameters": dict(self.params, replicas=self.replicas),
            "rows": rows,
            "fitted_slope": self.slope,
            "slope_stderr": self.slope_stderr,
            "ci": list(self.slope_ci),
            "pass": self.passed,
            "status": self.status,
            "seeds": self.seeds,
        }


def tail_curve(lemma, scales, hits, replicas, pass_rule, params=None, seeds=None):
    """Wilson intervals and a WLS fit of ``log p`` on ``log r`` over scales with enough hits.

    Weights are ``1 / var(log p_hat) = n p / (1 - p)``.
    """
    r = np.asarray(scales, dtype=float)
    h = np.asarray(hits, dtype=int)
    n = int(replicas)
    p = h / n
    lo, hi = proportion_confint(h, n, alpha=0.05, method="wilson")
    fitted = h >= MIN_HITS
    slope = se = intercept = float("nan")
    ci = (float("nan"), float("nan"))
    status = "ok"
    if not np.any(h > 0):
        status = "insufficient replicas"
    elif fitted.sum() < 2:
        status = "too few scales with enough hits"
    else:
        pf = p[fitted]
        w = n * pf / np.maximum(1.0 - pf, 1.0 / n)
        X = sm.add_constant(np.log(r[fitted]))
        res = sm.WLS(np.log(pf), X, weights=w).fit(cov_type="fixed scale", use_t=False)
        intercept, slope = map(float, res.params)
        se = float(res.bse[1])
        ci = (slope - Z95 * se, slope + Z95 * se)
    passed = status == "ok" and bool(pass_rule(slope, ci))
    return TailCurve(
        lemma=lemma,
        scales=tuple(map(float, r)),
        hits=tuple(map(int, h)),
        replicas=n,
        probabilities=tuple(map(float, p)),
        ci_low=tuple(map(float, np.atleast_1d(lo))),
        ci_high=tuple(map(float, np.atleast_1d(hi))),
        slope=slope,
        slope_stderr=se,
        intercept=intercept,
        slope_ci=ci,
        fitted=tuple(map(bool, fitted)),
        passed=passed,
        status=status,
        params=dict(params or {}),
        seeds=dict(seeds or {}),
    )


def lower_tail_curve(q, gamma, alpha, r_grid, replicas, seed=0, eps=TAIL_EPS, dt=MOMENT_DT, workers=None):
    """``P[J <= r^q]``; passes when the fitted slope is at least ``q (1 - 0.3)``."""
    if not q > 0:
        raise RangeError(f"q must be positive, got {q}")
    J = moment_samples(gamma, alpha, [eps], replicas, seed, dt, workers)[:, 0, 1]
    r = np.asarray(r_grid, dtype=float)
    hits = [(J <= rk**q).sum() for rk in r]
    return tail_curve(
        "lower-tail", r, hits, replicas, lambda s, ci: s >= q * (1 - SLACK),
        {"q": q, "gamma": gamma, "alpha": alpha, "eps": eps, "dt": dt},
        _seeds_record(seed, ["moment-path", "moment-field"]),
    )


def upper_tail_curve(q, gamma, alpha, r_grid, replicas, seed=0, eps=TAIL_EPS, dt=MOMENT_DT, workers=None):
    """``P[I >= r^-q]``; passes when the fitted slope is positive."""
    if not q > 0:
        raise RangeError(f"q must be positive, got {q}")
    I = moment_samples(gamma, alpha, [eps], replicas, seed, dt, workers)[:, 0, 0]
    r = np.asarray(r_grid, dtype=float)
    hits = [(I >= rk**-q).sum() for rk in r]
    return tail_curve(
        "upper-tail", r, hits, replicas, lambda s, ci: s > 0,
        {"q": q, "gamma": gamma, "alpha": alpha, "eps": eps, "dt": dt},
        _seeds_record(seed, ["moment-path", "moment-field"]),
    )


def _harmonic_replica(index, domain, r_grid, x_grid, master, factory):
    fseed = child_seed(master, "harmonic-field", index)
    f = factory(fseed) if factory is not None else build_gff(domain, fseed)
    return np.array([[sup_harmonic(f, x, r) > -math.log(r) for r in r_grid] for x in x_grid])


def harmonic_sup_tail(r_grid, replicas, x_grid=((0.0, 0.0),), domain=None, seed=0,
                      field_factory=None, workers=None):
    """``P[Omega^x_sqrt(r) > -log r]`` per ``x`` and the sup over ``x``.

    ``field_factory(seed)`` replaces the default GFF sampler (e.g. to inject
    a known field). Returns ``(sup_curve, per_x_curves)``.
    """
    domain = domain or DomainSpec("unit-square", 64)
    r = np.asarray(r_grid, dtype=float)
    if np.any(r <= 0) or np.any(r >= math.exp(-1)):
        raise RangeError("r must lie in (0, 1/e) so that the threshold -log r is above 1")
    xs = [tuple(map(float, check_point(x))) for x in x_grid]
    for x in xs:
        for rk in r:
            if domain.boundary_distance(np.array(x)) < 2 * math.sqrt(rk):
                raise RangeError(f"B({x}, 2 sqrt({rk})) is not inside the domain")
    func = partial(_harmonic_replica, domain=domain, r_grid=tuple(r), x_grid=xs,
                   master=seed, factory=field_factory)
    events = np.array(map_replicas(func, range(int(replicas)), workers))  # (rep, x, r)
    hits = events.sum(axis=0)
    params = {"domain": domain.to_dict()}
    seeds = _seeds_record(seed, ["harmonic-field"])
    rule = lambda s, ci: s > 0  # noqa: E731
    per_x = [
        tail_curve("harmonic-sup", r, hits[i], replicas, rule, dict(params, x=list(x)), seeds)
        for i, x in enumerate(xs)
    ]
    sup_hits = hits.max(axis=0)
    sup_curve = tail_curve("harmonic-sup", r, sup_hits, replicas, rule,
                           dict(params, x="sup over grid"), seeds)
    return sup_curve, per_x


# ---------------------------------------------------------------------------
# covariance bracket and scale invariance


@dataclass(frozen=True)
class CovarianceReport:
    rows: tuple
    max_abs_deviation: float
    max_abs_ci: tuple
    replicas: int
    method: str

    def to_report(self):
        return {
            "lemma": "covariance-bracket",
            "parameters": {"replicas": self.replicas, "method": self.method},
            "rows": list(self.rows),
            "max_abs_deviation": self.max_abs_deviation,
            "ci": list(self.max_abs_ci),
        }


def _circle_replica(index, domain, points, radii, master):
    f = build_gff(domain, child_seed(master, "covariance-field", index))
    return np.array([circle_averages(f, points, e) for e in radii])


def covariance_check(domain, eps_eta_pairs, pair_grid, replicas=0, seed=0, method="empirical", workers=None):
    """Compare ``cov(h_eps(x), h_eta(y))`` with ``log 1/(|x - y| + eps)``.

    ``method='empirical'`` uses ``replicas`` sampled fields and reports
    normal-theory intervals; ``method='exact'`` evaluates the lattice
    covariance directly.
    """
    pairs = [(check_point(x), check_point(y)) for x, y in pair_grid]
    scales = [(float(e), float(h)) for e, h in eps_eta_pairs]
    for e, h in scales:
        if h > e:
            raise ConfigurationError(f"need eta <= eps, got eps={e}, eta={h}")
    for x, y in pairs:
        for p in (x, y):
            if domain.boundary_distance(p) < 0.5 - 1e-12:
                raise ConfigurationError(f"point {tuple(p)} is outside the center half of the domain")
    rows = []
    if method == "exact":
        for x, y in pairs:
            for e, h in scales:
                cov = exact_circle_covariance(domain, x, e, y, h)
                rows.append(_cov_row(x, y, e, h, cov, 0.0))
    elif method == "empirical":
        if replicas < 2:
            raise ConfigurationError("empirical covariance needs at least 2 replicas")
        points = np.array([p for xy in pairs for p in xy])
        radii = sorted({r for s in scales for r in s})
        func = partial(_circle_replica, domain=domain, points=points, radii=tuple(radii), master=seed)
        data = np.array(map_replicas(func, range(int(replicas)), workers))  # (rep, radius, point)
        col = {r: k for k, r in enumerate(radii)}
        for i, (x, y) in enumerate(pairs):
            for e, h in scales:
                a = data[:, col[e], 2 * i]
                b = data[:, col[h], 2 * i + 1]
                cov = float(np.cov(a, b, ddof=1)[0, 1])
                se = math.sqrt((a.var(ddof=1) * b.var(ddof=1) + cov**2) / (len(a) - 1))
                rows.append(_cov_row(x, y, e, h, cov, se))
    else:
        raise ConfigurationError(f"unknown method {method!r}")
    devs = np.array([r["deviation"] for r in rows])
    ses = np.array([r["stderr"] for r in rows])
    k = int(np.argmax(np.abs(devs)))
    m = float(abs(devs[k]))
    return CovarianceReport(tuple(rows), m, (m - Z95 * ses[k], m + Z95 * ses[k]), int(replicas), method)


def _cov_row(x, y, e, h, cov, se):
    d = float(np.hypot(*(x - y)))
    ref = math.log(1.0 / (d + e))
    return {"x": list(map(float, x)), "y": list(map(float, y)), "eps": e, "eta": h,
            "covariance": cov, "reference": ref, "deviation": cov - ref, "stderr": se}


def scale_invariance_identity(lam, x, y, eps):
    """Residual ``cov(lam x, lam y; lam eps) - cov(x, y; eps) - log(1/lam)``.

    Valid wherever ``|x - y| <= 1`` (both the log branch and the sub-eps
    branch scale exactly); beyond that the zero branch breaks the identity.
    """
    if not 0 < lam < 1:
        raise RangeError(f"lambda must lie in (0, 1), got {lam}")
    x, y = check_point(x), check_point(y)
    if np.hypot(*x) > 0.5 or np.hypot(*y) > 0.5:
        raise RangeError("points must satisfy |x|, |y| <= 1/2")
    if not 0 < eps <= 1:
        raise RangeError(f"eps must lie in (0, 1], got {eps}")
    if np.hypot(*(x - y)) > 1:
        raise RangeError("|x - y| > 1 lies outside the scaling branches")
    return y_covariance(lam * x, lam * y, lam * eps) - y_covariance(x, y, eps) - math.log(1.0 / lam)
