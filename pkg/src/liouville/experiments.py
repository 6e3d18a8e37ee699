"""Desk-scale experiment protocols.

Each protocol takes an :class:`ExperimentConfig`, runs its replicas through
:func:`map_replicas` with per-replica child seeds, and returns an
:class:`ExperimentResult` holding tidy per-replica rows, estimate rows, and a
summary with the closed-form target and a pass flag.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import partial

import numpy as np

from ._validation import ConfigurationError, RangeError
from .clock import UNIFORM_MASS, clock_process, inverse_clock, sample_time, time_measure
from .config import ExperimentConfig
from .field import build_gff, circle_average, geometric_radii, rooted_shift
from .io import estimate_row
from .multifractal import (
    DEFAULT_THICK_WINDOW,
    ExponentEstimate,
    box_dimension,
    clock_image,
    diffusivity,
    formula_beta,
    formula_diffusivity,
    formula_time_dimension,
    local_clock_exponent,
    thick_time_set,
)
from .path import sample_path
from .seeding import SCHEME, child_seed, map_replicas, rng
from .verify import (
    lower_tail_curve,
    negative_moment_sweep,
    positive_moment_sweep,
    scale_invariance_identity,
    upper_tail_curve,
    harmonic_sup_tail,
)


@dataclass
class ExperimentResult:
    experiment: str
    rows: list
    estimates: list
    summary: dict
    passed: bool
    seeds: dict = dc_field(default_factory=dict)


def _seeds(config, streams):
    return {"master": config.seed, "scheme": SCHEME, "streams": list(streams)}


def _replicas(func, config, workers):
    return map_replicas(func, range(config.replicas), workers)


# ---------------------------------------------------------------------------
# circle-average variance


def _circle_replica(index, domain, radii, master):
    f = build_gff(domain, child_seed(master, "circle-field", index))
    return [circle_average(f, (0.0, 0.0), e) for e in radii]


def circle_variance(config, workers=None):
    """Sample variance of ``h_eps(0)`` on the disc against ``log(1/eps)``."""
    domain = config.domain
    radii = tuple(config.eps_ladder)
    func = partial(_circle_replica, domain=domain, radii=radii, master=config.seed)
    data = np.array(_replicas(func, config, workers))
    rows, ok = [], True
    n = len(data)
    for k, e in enumerate(radii):
        var = float(data[:, k].var(ddof=1))
        se = var * math.sqrt(2.0 / (n - 1))
        ref = float(domain.circle_variance(np.array([0.0, 0.0]), e))
        passed = abs(var - ref) <= 3 * se
        ok &= passed
        rows.append({"eps": e, "variance": var, "stderr": se, "reference": ref,
                     "z": (var - ref) / se, "pass": passed})
    return ExperimentResult("circle-variance", rows, [], {"fields": n, "pass": ok}, ok,
                            _seeds(config, ["circle-field"]))


# ---------------------------------------------------------------------------
# clock normalisation


def _normalization_replica(index, domain, gamma, eps, horizon, dt, master):
    f = build_gff(domain, child_seed(master, "norm-field", index))
    p = sample_path(dt, seed=child_seed(master, "norm-path", index))
    F = clock_process(p, f, gamma, eps)
    t = min(horizon, p.tau)
    return float(F(t)), t


def clock_normalization(config, workers=None):
    """Mean of ``F_{gamma,eps}(t ^ tau)`` against the matched control ``t ^ tau``.

    The test statistic is the paired difference, so path-to-path variation
    in ``tau`` cancels.
    """
    gamma = config.gamma
    eps = config.eps_ladder[-1]
    horizon = float(config.option("horizon", 0.05))
    func = partial(_normalization_replica, domain=config.domain, gamma=gamma, eps=eps,
                   horizon=horizon, dt=config.dt, master=config.seed)
    data = np.array(_replicas(func, config, workers))
    diff = data[:, 0] - data[:, 1]
    n = len(diff)
    se = float(diff.std(ddof=1) / math.sqrt(n))
    mean_diff = float(diff.mean())
    ok = abs(mean_diff) <= 3 * se
    summary = {
        "clock_mean": float(data[:, 0].mean()),
        "control_mean": float(data[:, 1].mean()),
        "mean_difference": mean_diff,
        "stderr": se,
        "z": mean_diff / se if se > 0 else 0.0,
        "pairs": n,
        "pass": ok,
    }
    rows = [{"replica": i, "clock": a, "control": b} for i, (a, b) in enumerate(data)]
    return ExperimentResult("clock-normalization", rows, [], summary, ok,
                            _seeds(config, ["norm-field", "norm-path"]))


# ---------------------------------------------------------------------------
# regularity of the clock at mu_alpha-typical times

REGULARITY_LAGS = (-15, -7)  # log2 of the smallest and largest path-time lag


def _regularity_replica(index, domain, alpha, gamma, eps, dt, draws, lags, master):
    f = build_gff(domain, child_seed(master, "regularity-field", index))
    p = sample_path(dt, seed=child_seed(master, "regularity-path", index))
    F = clock_process(p, f, gamma, eps)
    mu = time_measure(F if alpha == gamma else clock_process(p, f, alpha, eps))
    r = 2.0 ** np.arange(lags[0], lags[1] + 1)
    gen = rng(child_seed(master, "regularity-draw", index))
    out, rejected = [], 0
    while len(out) < draws:
        t = sample_time(mu, UNIFORM_MASS, gen.random())
        if t - r[-1] < 0 or t + r[-1] > p.tau:
            # two-sided ladder must fit inside [0, tau]
            rejected += 1
            if rejected > 1000:
                raise ConfigurationError("lag ladder does not fit inside the path lifetime")
            continue
        est = local_clock_exponent(F, t, r, "two-sided")
        out.append((t, est.value, est.stderr, est.r2))
    return out, rejected


def regularity(config, workers=None):
    """Two-sided local clock exponent at times drawn from ``mu_alpha``; median over draws."""
    alpha, gamma = config.alpha, config.gamma
    draws = int(config.option("draws_per_replica", 5))
    lags = tuple(config.option("log2_lags", REGULARITY_LAGS))
    target = formula_beta(alpha, gamma)
    band = tuple(config.option("band", (target - 0.15, target + 0.15)))
    func = partial(_regularity_replica, domain=config.domain, alpha=alpha, gamma=gamma,
                   eps=config.eps_ladder[-1], dt=config.dt, draws=draws, lags=lags, master=config.seed)
    results = _replicas(func, config, workers)
    rows, values, rejected = [], [], 0
    for i, (draw_rows, rej) in enumerate(results):
        rejected += rej
        for t, v, se, r2 in draw_rows:
            rows.append({"replica": i, "t": t, "exponent": v, "stderr": se, "r2": r2})
            values.append(v)
    values = np.array(values)
    median = float(np.median(values))
    ok = band[0] <= median <= band[1]
    scales = tuple(2.0 ** np.arange(lags[0], lags[1] + 1))
    est = ExponentEstimate(median, float(1.2533 * values.std(ddof=1) / math.sqrt(values.size)),
                           scales, float(np.mean([r["r2"] for r in rows])), "two-sided",
                           f"local clock exponent [median of {values.size}]")
    summary = {"median": median, "q25": float(np.quantile(values, 0.25)),
               "q75": float(np.quantile(values, 0.75)), "target": target, "band": list(band),
               "draws": int(values.size), "rejected_draws": rejected, "pass": ok}
    return ExperimentResult("regularity", rows, [estimate_row("regularity", alpha, gamma, est, config.seed)],
                            summary, ok, _seeds(config, ["regularity-field", "regularity-path", "regularity-draw"]))


# ---------------------------------------------------------------------------
# dimension of the clock image of thick times

BOX_OCTAVES = (2, 11)  # box sizes extent * 2**-k


def _thick_replica(index, domain, alpha, gamma, eps, dt, tol, window, stride, octaves, master):
    f = build_gff(domain, child_seed(master, "thick-field", index))
    p = sample_path(dt, seed=child_seed(master, "thick-path", index))
    radii = geometric_radii(window[1], window[0], 0.5)
    S = thick_time_set(p, f, alpha, tol, eps_ladder=radii, stride=stride)
    if S.empty:
        return None
    F = clock_process(p, f, gamma, eps)
    image = clock_image(F, S)
    extent = image.ambient[1] - image.ambient[0]
    kmax = octaves[1]
    if image.resolution is not None:
        kmax = min(kmax, int(math.floor(math.log2(extent / (2 * image.resolution)))))
    if kmax - octaves[0] < 2:
        return None
    est = box_dimension(image, (extent * 2.0**-kmax, extent * 2.0 ** -octaves[0]))
    return est, S.lebesgue / p.tau, len(S)


def thick_dimension(config, workers=None):
    """Box dimension of ``F_gamma(T_alpha)``, averaged over replicas.

    With ``gamma = 0`` this is the thick-time set itself. The pass rule is
    ``|mean - target| <= band`` or, when ``min_value`` is set, ``mean >= min_value``.
    """
    alpha, gamma = config.alpha, config.gamma
    tol = float(config.option("tol", 0.25))
    window = tuple(config.option("window", DEFAULT_THICK_WINDOW))
    stride = int(config.option("stride", 16))
    octaves = tuple(config.option("box_octaves", BOX_OCTAVES))
    func = partial(_thick_replica, domain=config.domain, alpha=alpha, gamma=gamma,
                   eps=config.eps_ladder[-1], dt=config.dt, tol=tol, window=window,
                   stride=stride, octaves=octaves, master=config.seed)
    results = _replicas(func, config, workers)
    rows, ests = [], []
    for i, res in enumerate(results):
        if res is None:
            rows.append({"replica": i, "dimension": None, "stderr": None, "fraction": None, "intervals": 0})
            continue
        est, frac, count = res
        ests.append(est)
        rows.append({"replica": i, "dimension": est.value, "stderr": est.stderr,
                     "fraction": frac, "intervals": count})
    if not ests:
        summary = {"status": "all thick-time sets empty", "pass": False}
        return ExperimentResult("thick-dimension", rows, [], summary, False)
    vals = np.array([e.value for e in ests])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size)) if vals.size > 1 else 0.0
    target = formula_time_dimension(alpha, gamma)
    min_value = config.option("min_value")
    band = float(config.option("band", 0.15))
    ok = mean >= float(min_value) if min_value is not None else abs(mean - target) <= band
    est = ExponentEstimate(mean, se, ests[0].scales, float(np.mean([e.r2 for e in ests])),
                           None, f"box (upper bound proxy) [mean of {vals.size}]")
    summary = {"mean": mean, "stderr": se, "median": float(np.median(vals)), "target": target,
               "tol": tol, "used_replicas": int(vals.size), "empty_or_short": len(results) - int(vals.size),
               "pass": ok}
    if min_value is not None:
        summary["min_value"] = float(min_value)
    else:
        summary["band"] = band
    return ExperimentResult("thick-dimension", rows,
                            [estimate_row("thick-dimension", alpha, gamma, est, config.seed)],
                            summary, ok, _seeds(config, ["thick-field", "thick-path"]))


# ---------------------------------------------------------------------------
# diffusivity

DIFFUSIVITY_LAGS = (-14, -6)  # log2 path-time window, mapped to clock time per replica


def _diffusivity_replica(index, domain, alpha, gamma, eps, dt, lags, master):
    f = build_gff(domain, child_seed(master, "diffusivity-field", index))
    p = sample_path(dt, seed=child_seed(master, "diffusivity-path", index))
    if alpha > 0:
        f = rooted_shift(f, (0.0, 0.0), alpha)
    F = clock_process(p, f, gamma, eps)
    r = 2.0 ** np.arange(lags[0], lags[1] + 1)
    r = r[r < p.tau]
    u = np.interp(r, F.times, F.values)
    try:
        return diffusivity(F.values, p.positions[: p.tau_index + 1], u)
    except (ConfigurationError, RangeError):
        return None


def diffusivity_experiment(config, workers=None):
    """Limsup growth exponent of ``|Z_t|`` started from the origin.

    For ``alpha > 0`` the field is rooted at the start so the origin is an
    ``alpha``-thick point. The clock-time ladder is the image under ``F`` of
    a fixed dyadic path-time window.
    """
    alpha, gamma = config.alpha, config.gamma
    lags = tuple(config.option("log2_lags", DIFFUSIVITY_LAGS))
    band = float(config.option("band", 0.10))
    func = partial(_diffusivity_replica, domain=config.domain, alpha=alpha, gamma=gamma,
                   eps=config.eps_ladder[-1], dt=config.dt, lags=lags, master=config.seed)
    results = _replicas(func, config, workers)
    ests = [e for e in results if e is not None]
    rows = [{"replica": i, "exponent": None if e is None else e.value,
             "stderr": None if e is None else e.stderr, "r2": None if e is None else e.r2}
            for i, e in enumerate(results)]
    if len(ests) < 2:
        return ExperimentResult("diffusivity", rows, [], {"status": "too few usable replicas", "pass": False}, False)
    vals = np.array([e.value for e in ests])
    mean = float(vals.mean())
    se = float(vals.std(ddof=1) / math.sqrt(vals.size))
    target = formula_diffusivity(alpha, gamma)
    ok = abs(mean - target) <= band
    est = ExponentEstimate(mean, se, tuple(2.0 ** np.arange(lags[0], lags[1] + 1)),
                           float(np.mean([e.r2 for e in ests])), None,
                           f"diffusivity (limsup) [mean of {vals.size}]")
    summary = {"mean": mean, "stderr": se, "median": float(np.median(vals)), "target": target,
               "band": band, "used_replicas": int(vals.size), "pass": ok}
    return ExperimentResult("diffusivity", rows, [estimate_row("diffusivity", alpha, gamma, est, config.seed)],
                            summary, ok, _seeds(config, ["diffusivity-field", "diffusivity-path"]))


# ---------------------------------------------------------------------------
# differentiability surrogate


def _differentiability_replica(index, domain, gamma, eps, dt, draws, levels, floor_factor, master):
    f = build_gff(domain, child_seed(master, "diff-field", index))
    p = sample_path(dt, seed=child_seed(master, "diff-path", index))
    F = clock_process(p, f, gamma, eps)
    mu = time_measure(F)
    gen = rng(child_seed(master, "diff-draw", index))
    t = np.array([sample_time(mu, UNIFORM_MASS, u) for u in gen.random(draws)])
    lag = floor_factor * eps**2
    t = t[t + lag <= p.tau]
    s = F(t)
    # smallest clock lag: median clock increment over a path lag of floor_factor * eps^2
    floor = float(np.median(F(t + lag) - s))
    r_min = 2.0 ** math.ceil(math.log2(floor))
    r = r_min * 2.0 ** np.arange(levels)[::-1]  # decreasing
    ratios = []
    for rk in r:
        ok = s + rk <= F.total
        if not np.any(ok):
            ratios.append(float("nan"))
            continue
        z0 = p.position_at(t[ok])
        z1 = p.position_at(inverse_clock(F, s[ok] + rk))
        ratios.append(float(np.median(np.hypot(*(z1 - z0).T)) / rk))
    return r, np.array(ratios)


def differentiability(config, workers=None):
    """Median ``|Z_{s+r} - Z_s| / r`` at ``mu_gamma``-sampled times over dyadic ``r``.

    A replica counts when the ratio strictly decreases over the three
    smallest lags; the experiment passes when at least ``min_fraction`` do.
    """
    gamma = config.gamma
    draws = int(config.option("draws_per_replica", 100))
    levels = int(config.option("levels", 6))
    floor_factor = float(config.option("floor_factor", 16.0))
    min_fraction = float(config.option("min_fraction", 0.7))
    func = partial(_differentiability_replica, domain=config.domain, gamma=gamma,
                   eps=config.eps_ladder[-1], dt=config.dt, draws=draws, levels=levels,
                   floor_factor=floor_factor, master=config.seed)
    results = _replicas(func, config, workers)
    rows, decreasing = [], []
    for i, (r, ratios) in enumerate(results):
        last = ratios[-3:]
        dec = bool(np.all(np.isfinite(last)) and np.all(np.diff(last) < 0))
        decreasing.append(dec)
        for rk, q in zip(r, ratios):
            rows.append({"replica": i, "r": rk, "median_ratio": q, "decreasing": dec})
    frac = float(np.mean(decreasing))
    ok = frac >= min_fraction
    summary = {"fraction_decreasing": frac, "min_fraction": min_fraction, "replicas": len(results),
               "beta": formula_beta(config.alpha, gamma), "pass": ok}
    return ExperimentResult("differentiability", rows, [], summary, ok,
                            _seeds(config, ["diff-field", "diff-path", "diff-draw"]))


# ---------------------------------------------------------------------------
# lemma harness wrappers


def _report_result(name, report, seeds):
    rows = [dict(r) for r in report["rows"]]
    summary = {k: v for k, v in report.items() if k not in ("rows", "seeds")}
    return ExperimentResult(name, rows, [], summary, bool(report["pass"]), seeds)


def moment_experiment(config, workers=None, kind=None):
    p = float(config.option("p", 0.3))
    replicas = config.replicas
    if kind == "positive-moment":
        sweep = positive_moment_sweep(p, config.gamma, config.alpha, config.eps_ladder, replicas,
                                      config.seed, config.dt, workers)
    else:
        sweep = negative_moment_sweep(config.gamma, config.alpha, config.eps_ladder, replicas,
                                      config.seed, config.dt, workers)
    rep = sweep.to_report()
    return _report_result(kind, rep, rep["seeds"])


def tail_experiment(config, workers=None, kind=None):
    q = float(config.option("q", 1.0))
    r_grid = config.option("r_grid")
    replicas = config.replicas
    eps = config.eps_ladder[-1]
    if kind == "lower-tail":
        curve = lower_tail_curve(q, config.gamma, config.alpha, r_grid or (0.5, 0.25, 0.125, 0.0625, 0.03125),
                                 replicas, config.seed, eps, config.dt, workers)
    elif kind == "upper-tail":
        curve = upper_tail_curve(q, config.gamma, config.alpha, r_grid or (1.0, 0.5, 0.25, 0.125, 0.0625),
                                 replicas, config.seed, eps, config.dt, workers)
    else:
        curve, _ = harmonic_sup_tail(r_grid or HARMONIC_R_GRID, replicas,
                                     domain=config.domain, seed=config.seed, workers=workers)
    rep = curve.to_report()
    rep["monotone"] = curve.monotone
    return _report_result(kind, rep, rep["seeds"])


# B(0, 2 sqrt(r)) stays clear of the boundary and sqrt(r) >= 8 spacings at n = 128
HARMONIC_R_GRID = (0.1, 0.05, 0.025)


def scale_invariance(config, workers=None):
    """Residuals of the exact scaling identity of the ``Y`` covariance."""
    count = int(config.option("triples", 20))
    gen = rng(child_seed(config.seed, "scale-invariance"))
    rows = []
    for lam in config.option("lambdas", (0.5, 0.25)):
        k = 0
        while k < count:
            x, y = gen.uniform(-0.5, 0.5, (2, 2))
            if np.hypot(*x) > 0.5 or np.hypot(*y) > 0.5:
                continue
            eps = float(gen.uniform(0.01, 1.0))
            res = float(scale_invariance_identity(lam, x, y, eps))
            rows.append({"lambda": lam, "x": x.tolist(), "y": y.tolist(), "eps": eps, "residual": res})
            k += 1
    worst = max(abs(r["residual"]) for r in rows)
    ok = worst < 1e-12
    return ExperimentResult("scale-invariance", rows, [], {"max_abs_residual": worst, "pass": ok}, ok,
                            _seeds(config, ["scale-invariance"]))


PROTOCOLS = {
    "circle-variance": circle_variance,
    "clock-normalization": clock_normalization,
    "regularity": regularity,
    "thick-dimension": thick_dimension,
    "diffusivity": diffusivity_experiment,
    "differentiability": differentiability,
    "positive-moment": partial(moment_experiment, kind="positive-moment"),
    "negative-moment": partial(moment_experiment, kind="negative-moment"),
    "lower-tail": partial(tail_experiment, kind="lower-tail"),
    "upper-tail": partial(tail_experiment, kind="upper-tail"),
    "harmonic-tail": partial(tail_experiment, kind="harmonic-tail"),
    "scale-invariance": scale_invariance,
}


def run_experiment(config: ExperimentConfig, workers=None) -> ExperimentResult:
    try:
        protocol = PROTOCOLS[config.experiment]
    except KeyError:
        raise ConfigurationError(f"{config.experiment!r} is not a runnable experiment") from None
    return protocol(config, workers)


_MOMENTS = {"alpha": 1.0, "gamma": 1.0, "dt": 1e-4, "domain": {"shape": "unit-square", "n": 64}}
_FINE = {"domain": {"shape": "unit-square", "n": 2048}, "dt": 2.5e-7, "eps_ladder": (4.0 / 2048,)}
_MEDIUM = {"domain": {"shape": "unit-square", "n": 512}, "dt": 1e-6, "eps_ladder": (0.01,)}
PRESETS = {
    "circle-variance": {"domain": {"shape": "unit-disc", "n": 256}, "eps_ladder": (0.2, 0.1, 0.05),
                        "replicas": 4000},
    "clock-normalization": {"gamma": 1.0, "domain": {"shape": "unit-square", "n": 256}, "dt": 1e-5,
                            "eps_ladder": (0.05,), "replicas": 3000, "options": {"horizon": 0.05}},
    "regularity": dict(_FINE, alpha=1.0, gamma=1.0, replicas=20,
                       options={"draws_per_replica": 5, "log2_lags": list(REGULARITY_LAGS)}),
    "thick-dimension": dict(_MEDIUM, alpha=1.0, gamma=0.0, replicas=20,
                            options={"tol": 0.35, "stride": 16, "box_octaves": list(BOX_OCTAVES)}),
    "diffusivity": dict(_FINE, alpha=1.0, gamma=1.0, replicas=50,
                        options={"log2_lags": list(DIFFUSIVITY_LAGS)}),
    "differentiability": dict(_FINE, alpha=1.6, gamma=1.6, replicas=20,
                              options={"draws_per_replica": 100, "levels": 6, "floor_factor": 16.0}),
    "positive-moment": dict(_MOMENTS, eps_ladder=(0.1, 0.05, 0.025), replicas=1000, options={"p": 0.3}),
    "negative-moment": dict(_MOMENTS, eps_ladder=(0.1, 0.05, 0.025), replicas=1000),
    "lower-tail": dict(_MOMENTS, eps_ladder=(0.05,), replicas=2000, options={"q": 1.0}),
    "upper-tail": dict(_MOMENTS, eps_ladder=(0.05,), replicas=2000, options={"q": 1.0}),
    "harmonic-tail": {"domain": {"shape": "unit-square", "n": 128}, "replicas": 2000},
    "scale-invariance": {"replicas": 1, "options": {"triples": 20, "lambdas": [0.5, 0.25]}},
}


def preset(experiment, **overrides):
    """The calibrated desk protocol for ``experiment`` with ``overrides`` applied.

    ``options`` in ``overrides`` are merged into the preset options.
    """
    if experiment not in PRESETS:
        raise ConfigurationError(f"no preset for {experiment!r}")
    base = dict(PRESETS[experiment])
    options = dict(base.pop("options", {}))
    options.update(overrides.pop("options", None) or {})
    base.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig.from_dict(dict(base, experiment=experiment, options=options))
