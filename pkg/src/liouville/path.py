"""Discretised planar Brownian motion stopped on leaving a disc."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._validation import ConfigurationError, DomainError, check_point, check_positive
from .seeding import rng as make_rng

CHUNK = 1 << 15  # increments drawn per generator call; fixed for reproducibility
DEFAULT_MAX_TIME = 20.0


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Brownian knots ``B_0, B_dt, ...`` up to the first exit from ``B(0, stop_radius)``.

    When the path exits, the last knot is the interpolated exit point and
    ``tau`` the interpolated exit time, so ``positions[tau_index]`` lies on
    the circle. ``tau_index`` is ``None`` when ``max_steps`` ran out first.
    """

    dt: float
    positions: np.ndarray
    start: np.ndarray
    stop_radius: float
    seed: int | None = None
    tau_index: int | None = None
    tau: float | None = None
    max_steps: int | None = None

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.flags.writeable:
            pos = pos.copy()
            pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if pos.ndim != 2 or pos.shape[1] != 2 or len(pos) < 2:
            raise ConfigurationError("positions must have shape (k, 2) with k >= 2")

    @property
    def exited(self):
        return self.tau_index is not None

    @property
    def steps(self):
        return len(self.positions) - 1

    @property
    def times(self):
        t = np.arange(len(self.positions)) * self.dt
        if self.exited:
            t[-1] = self.tau
        return t

    @property
    def duration(self):
        return self.tau if self.exited else self.steps * self.dt

    @property
    def exit_point(self):
        return self.positions[-1] if self.exited else None

    def position_at(self, t):
        """Linear interpolation of the knots at path times ``t``."""
        t = np.asarray(t, dtype=float)
        times = self.times
        x = np.interp(t, times, self.positions[:, 0])
        y = np.interp(t, times, self.positions[:, 1])
        return np.stack([x, y], axis=-1)

    def manifest(self):
        return {
            "seed": self.seed,
            "dt": self.dt,
            "tau_index": self.tau_index,
            "tau": self.tau,
            "start": [float(v) for v in self.start],
            "stop_radius": self.stop_radius,
            "max_steps": self.max_steps,
        }


def _crossing_fraction(p, q, radius):
    # smallest s in (0, 1] with |p + s (q - p)| = radius, given |p| < radius <= |q|
    d = q - p
    a = float(d @ d)
    b = 2.0 * float(p @ d)
    c = float(p @ p) - radius**2
    return (-b + math.sqrt(b * b - 4.0 * a * c)) / (2.0 * a)


def sample_path(dt, start=(0.0, 0.0), stop_radius=0.5, seed=0, max_steps=None):
    """Simulate Brownian motion from ``start`` until it leaves ``B(0, stop_radius)``.

    Parameters
    ----------
    dt : float
        Time step; increments are ``N(0, dt I)``.
    start : point
        Must satisfy ``|start| < stop_radius``.
    stop_radius : float
    seed : int
    max_steps : int, optional
        Defaults to ``ceil(20 / dt)``. If no exit happens within this many
        steps the path is returned with ``tau_index = None``.

    Returns
    -------
    BrownianPath
    """
    dt = check_positive(dt, "dt")
    radius = check_positive(stop_radius, "stop_radius")
    start = check_point(start, "start")
    if not np.hypot(*start) < radius:
        raise DomainError(f"start {tuple(start)} is not inside the disc of radius {radius}")
    if max_steps is None:
        max_steps = int(math.ceil(DEFAULT_MAX_TIME / dt))
    if int(max_steps) != max_steps or max_steps < 1:
        raise ConfigurationError(f"max_steps must be a positive integer, got {max_steps}")
    max_steps = int(max_steps)
    generator = make_rng(seed)
    scale = math.sqrt(dt)
    chunks = [start[None, :]]
    current = start
    done = 0
    r2 = radius**2
    while done < max_steps:
        inc = generator.standard_normal((CHUNK, 2)) * scale
        take = min(CHUNK, max_steps - done)
        block = current + np.cumsum(inc[:take], axis=0)
        out = np.nonzero(np.einsum("ij,ij->i", block, block) >= r2)[0]
        if out.size:
            k = int(out[0])
            prev = block[k - 1] if k > 0 else current
            s = _crossing_fraction(prev, block[k], radius)
            exit_point = prev + s * (block[k] - prev)
            chunks.append(block[:k])
            chunks.append(exit_point[None, :])
            positions = np.concatenate(chunks)
            tau_index = len(positions) - 1
            tau = (done + k + s) * dt
            return BrownianPath(dt, positions, start, radius, seed, tau_index, tau, max_steps)
        chunks.append(block)
        current = block[-1]
        done += take
    return BrownianPath(dt, np.concatenate(chunks), start, radius, seed, None, None, max_steps)


def coarsen(path, factor):
    """Subsample an exited path every ``factor`` steps, keeping its exit.

    The result is the same Brownian driver observed on a grid of step
    ``factor * dt``; used to compare clocks across time steps.
    """
    if int(factor) != factor or factor < 1:
        raise ConfigurationError(f"factor must be a positive integer, got {factor}")
    if not path.exited:
        raise ConfigurationError("only exited paths can be coarsened")
    factor = int(factor)
    inner = path.positions[: path.tau_index : factor]
    positions = np.concatenate([inner, path.positions[-1:]])
    return BrownianPath(
        path.dt * factor, positions, path.start, path.stop_radius, path.seed,
        len(positions) - 1, path.tau, path.max_steps,
    )


@dataclass(frozen=True)
class ModulusReport:
    """Lévy-modulus diagnostics at dyadic lags.

    ``upper_ratio[k]`` is ``max_t |B_{t+s} - B_t| / s^(1/2 - delta)`` at lag
    ``lags[k]``. ``lower_fraction[k]`` is the fraction of start times for
    which some dyadic lag ``u <= lags[k]`` has ``|B_{t+u} - B_t| >= u^(1/2 + delta)``;
    ``lower_min[k]`` is the smallest such normalised increment over ``t``.
    """

    lags: np.ndarray
    upper_ratio: np.ndarray
    lower_fraction: np.ndarray
    lower_min: np.ndarray
    delta: float
    upper_bound: float
    upper_violation: bool
    lower_violation: bool

    @property
    def brownian(self):
        return not (self.upper_violation or self.lower_violation)


def modulus_check(path, lag_min=1e-5, lag_max=1e-2, delta=0.1, upper_bound=5.0, lower_level=0.5):
    """Compare path increments with the Lévy-modulus envelopes ``s^(1/2 -+ delta)``.

    A Brownian path has bounded upper ratios and, at every start time, lags
    where the increment beats ``s^(1/2 + delta)``. The upper display is
    flagged when any ratio exceeds ``upper_bound``; the lower one when fewer
    than ``lower_level`` of start times satisfy it at the smallest lag.
    """
    positions = np.asarray(path.positions[: path.tau_index] if path.exited else path.positions)
    if len(positions) < 10_000:
        raise ConfigurationError(f"modulus check needs >= 1e4 steps, path has {len(positions)}")
    if lag_min < path.dt * (1 - 1e-12):
        raise ConfigurationError(f"lag_min {lag_min:g} is below the time step {path.dt:g}")
    if not lag_min <= lag_max:
        raise ConfigurationError("lag_min must not exceed lag_max")
    duration = (len(positions) - 1) * path.dt
    if lag_max > duration / 2:
        raise ConfigurationError(f"lag_max {lag_max:g} exceeds half the path duration {duration:g}")
    j0 = int(math.ceil(math.log2(lag_min / path.dt) - 1e-9))
    j1 = int(math.floor(math.log2(lag_max / path.dt) + 1e-9))
    if j1 < j0:
        raise ConfigurationError("no dyadic lag fits in the requested range")
    steps = 2 ** np.arange(0, j1 + 1)
    lags = steps * path.dt
    nt = len(positions) - steps[-1]
    upper = np.empty(j1 + 1)
    best = np.zeros(nt)
    lower_fraction = np.empty(j1 + 1)
    lower_min = np.empty(j1 + 1)
    for k, (m, s) in enumerate(zip(steps, lags)):
        inc = np.hypot(*(positions[m:] - positions[:-m]).T)
        upper[k] = inc.max() / s ** (0.5 - delta)
        np.maximum(best, inc[:nt] / s ** (0.5 + delta), out=best)
        lower_fraction[k] = np.mean(best >= 1.0)
        lower_min[k] = best.min()
    keep = slice(j0, j1 + 1)
    upper, lower_fraction, lower_min = upper[keep], lower_fraction[keep], lower_min[keep]
    return ModulusReport(
        lags=lags[keep],
        upper_ratio=upper,
        lower_fraction=lower_fraction,
        lower_min=lower_min,
        delta=float(delta),
        upper_bound=float(upper_bound),
        upper_violation=bool(np.any(upper > upper_bound)),
        lower_violation=bool(lower_fraction[0] < lower_level),
    )
