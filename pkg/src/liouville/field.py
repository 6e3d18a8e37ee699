"""Lattice Gaussian free fields, circle averages, and the scale-invariant field Y.

Fields live on the node lattice of ``[-1, 1]^2`` with spacing ``1/n``; node
``(i, j)`` sits at ``(-1 + i/n, -1 + j/n)``. The zero-boundary GFF has
covariance ``2*pi*G`` where ``G`` inverts the (unscaled) graph Laplacian on the
interior nodes, so ``cov(h(x), h(y)) ~ log(1/|x - y|)`` away from the diagonal.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.fft import dstn, idstn
from scipy.interpolate import RectBivariateSpline
from scipy.linalg import LinAlgError, cholesky
from scipy.spatial.distance import cdist

from ._validation import (
    ConfigurationError,
    DomainError,
    NumericalError,
    RangeError,
    check_exponent_parameter,
    check_point,
    check_points,
)
from .seeding import rng as make_rng

SQUARE = "unit-square"
DISC = "unit-disc"
SHAPES = (SQUARE, DISC)

KINDS = ("gff", "y-field", "rooted", "harmonic-part", "bulk-part", "custom")
_ZERO_BOUNDARY_KINDS = ("gff", "bulk-part")

JITTER_LADDER = (1e-12, 1e-10, 1e-8)
MAX_DENSE_POINTS = 8000
CIRCLE_FLOOR = 4  # minimum circle radius in lattice spacings
DISC_FLOOR = 8  # minimum harmonic-decomposition radius in lattice spacings

_TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class DomainSpec:
    """Lattice discretisation of the unit square ``[-1,1]^2`` or the unit disc.

    Both shapes contain the closed disc ``B(0, 1/2)`` with margin 1/2, so
    circle averages of radius up to 1/2 are defined along any path stopped at
    radius 1/2.
    """

    shape: str = SQUARE
    n: int = 128

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ConfigurationError(f"shape must be one of {SHAPES}, got {self.shape!r}")
        if int(self.n) != self.n or self.n < 64:
            raise ConfigurationError(f"resolution n must be an integer >= 64, got {self.n}")
        object.__setattr__(self, "n", int(self.n))

    @property
    def spacing(self):
        return 1.0 / self.n

    @property
    def size(self):
        return 2 * self.n + 1

    @property
    def coords(self):
        return (np.arange(self.size) - self.n) / self.n

    @property
    def circle_floor(self):
        return CIRCLE_FLOOR * self.spacing

    def boundary_distance(self, points):
        pts = np.asarray(points, dtype=float)
        if self.shape == SQUARE:
            return 1.0 - np.max(np.abs(pts), axis=-1)
        return 1.0 - np.hypot(pts[..., 0], pts[..., 1])

    def interior_mask(self):
        return _interior_mask(self)

    def nearest_node(self, z):
        z = check_point(z)
        i, j = np.rint((z + 1.0) * self.n).astype(int)
        if not (0 <= i < self.size and 0 <= j < self.size):
            raise DomainError(f"point {tuple(z)} lies outside the lattice")
        return int(i), int(j)

    def node_position(self, i, j):
        return np.array([(i - self.n) / self.n, (j - self.n) / self.n])

    def log_conformal_radius(self, points):
        """``log C(z, D)``; analytic on the disc, tabulated on the square."""
        pts = np.asarray(points, dtype=float)
        if self.shape == DISC:
            r2 = np.sum(pts**2, axis=-1)
            return np.log(1.0 - r2)
        return _square_log_conformal_radius(pts)

    def circle_variance(self, points, eps):
        """Variance ``log(1/eps) + log C(z, D)`` of the continuum circle average."""
        return math.log(1.0 / eps) + self.log_conformal_radius(points)

    def to_dict(self):
        return {"shape": self.shape, "n": self.n}


@lru_cache(maxsize=8)
def _interior_mask(domain):
    size = domain.size
    mask = np.zeros((size, size), dtype=bool)
    if domain.shape == SQUARE:
        mask[1:-1, 1:-1] = True
    else:
        c = domain.coords
        X, Y = np.meshgrid(c, c, indexing="ij")
        mask[:] = X**2 + Y**2 < 1.0 - 1e-12
        mask[0, :] = mask[-1, :] = mask[:, 0] = mask[:, -1] = False
    mask.setflags(write=False)
    return mask


@dataclass(frozen=True, eq=False)
class GridField:
    """One realisation of a scalar field on the lattice of ``domain``.

    ``values[i, j]`` is the value at node ``(i, j)``. Arrays are made
    read-only so instances can be shared between workers.
    """

    domain: DomainSpec
    values: np.ndarray
    kind: str = "custom"
    seed: int | None = None
    truncation: int | None = None
    root: tuple | None = None
    meta: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.flags.writeable:
            values = values.copy()
            values.setflags(write=False)
        object.__setattr__(self, "values", values)
        if values.shape != (self.domain.size, self.domain.size):
            raise ConfigurationError(
                f"values shape {values.shape} does not match lattice {self.domain.size}"
            )
        if self.kind not in KINDS:
            raise ConfigurationError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(values)):
            raise NumericalError("field values must be finite")
        if self.kind in _ZERO_BOUNDARY_KINDS and np.any(values[~self.domain.interior_mask()] != 0):
            raise ConfigurationError(f"a {self.kind} field must vanish off the interior nodes")

    @classmethod
    def from_function(cls, domain, func):
        """Sample ``func(x, y)`` on every lattice node (kind ``custom``)."""
        X, Y = np.meshgrid(domain.coords, domain.coords, indexing="ij")
        return cls(domain, np.broadcast_to(func(X, Y), X.shape).astype(float))

    def shifted(self, constant):
        return GridField(self.domain, self.values + constant, kind="custom", seed=self.seed)

    def at(self, points):
        """Bilinear interpolation at arbitrary points inside the square."""
        pts = check_points(points)
        return _bilinear(self.values, self.domain.n, pts[:, 0], pts[:, 1])


# ---------------------------------------------------------------------------
# lattice Laplacians and solvers


def _graph_laplacian(mask):
    """Interior graph Laplacian on ``mask`` plus the transposed edge operator.

    Returns ``(index, L, Dt)`` where ``index`` maps grid nodes to unknowns
    (``-1`` off the mask), ``L = Dt @ Dt.T`` is the 5-point Laplacian with
    Dirichlet data outside the mask, and ``Dt`` has one column per lattice
    edge incident to the mask.
    """
    index = -np.ones(mask.shape, dtype=np.intp)
    I, J = np.nonzero(mask)
    count = I.size
    index[I, J] = np.arange(count)
    rows, cols, vals = [np.arange(count)], [np.arange(count)], [np.full(count, 4.0)]
    erow, ecol, eval_ = [], [], []
    edge = 0
    for di, dj in ((1, 0), (0, 1), (-1, 0), (0, -1)):
        nb = index[I + di, J + dj]
        inner = nb >= 0
        rows.append(index[I[inner], J[inner]])
        cols.append(nb[inner])
        vals.append(-np.ones(inner.sum()))
        # interior-interior edges are counted once, from the +x / +y side
        keep = ~inner if (di < 0 or dj < 0) else np.ones_like(inner)
        src = index[I[keep], J[keep]]
        k = src.size
        ids = np.arange(edge, edge + k)
        erow.append(src)
        ecol.append(ids)
        eval_.append(np.ones(k))
        both = inner[keep]
        erow.append(nb[keep][both])
        ecol.append(ids[both])
        eval_.append(-np.ones(both.sum()))
        edge += k
    L = sp.csc_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(count, count)
    )
    Dt = sp.csr_matrix(
        (np.concatenate(eval_), (np.concatenate(erow), np.concatenate(ecol))), shape=(count, edge)
    )
    return index, L, Dt


class _MaskSolver:
    """Cached sparse LU of the Dirichlet Laplacian on a node mask."""

    def __init__(self, mask):
        self.mask = mask
        self.index, self.L, self.Dt = _graph_laplacian(mask)
        self.lu = spla.splu(self.L, permc_spec="MMD_AT_PLUS_A")
        self.nodes = np.nonzero(mask)

    def boundary_rhs(self, values):
        """Sum of neighbour values lying off the mask, for every unknown."""
        rhs = np.zeros(self.L.shape[0])
        I, J = self.nodes
        for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            outside = ~self.mask[I + di, J + dj]
            rhs[outside] += values[I[outside] + di, J[outside] + dj]
        return rhs


@lru_cache(maxsize=4)
def _domain_solver(domain):
    return _MaskSolver(domain.interior_mask())


@lru_cache(maxsize=8)
def _square_eigenvalues(n):
    N = 2 * n
    k = np.arange(1, N)
    lam1 = 2.0 - 2.0 * np.cos(np.pi * k / N)
    return lam1[:, None] + lam1[None, :]


def _square_green_apply(n, rhs_interior):
    """``L^{-1} rhs`` for the square's interior Laplacian via sine transforms."""
    lam = _square_eigenvalues(n)
    axes = (-2, -1)
    return idstn(dstn(rhs_interior, type=1, norm="ortho", axes=axes) / lam, type=1, norm="ortho", axes=axes)


def green_apply(domain, rhs):
    """Return ``2*pi*L^{-1} rhs`` on the full grid (zero off the interior).

    ``rhs`` is a full-grid array; entries off the interior are ignored.
    """
    rhs = np.asarray(rhs, dtype=float)
    out = np.zeros_like(rhs)
    if domain.shape == SQUARE:
        out[1:-1, 1:-1] = _TWO_PI * _square_green_apply(domain.n, rhs[1:-1, 1:-1])
    else:
        solver = _domain_solver(domain)
        out[solver.nodes] = _TWO_PI * solver.lu.solve(rhs[solver.nodes])
    return out


# ---------------------------------------------------------------------------
# GFF sampling


def _spectral_square_sample(n, generator, modes=None):
    """Zero-boundary lattice GFF on ``[-1,1]^2`` by sine-basis synthesis."""
    lam = _square_eigenvalues(n)
    coeff = generator.standard_normal(lam.shape) * np.sqrt(_TWO_PI / lam)
    if modes is not None:
        coeff[modes:, :] = 0.0
        coeff[:, modes:] = 0.0
    values = np.zeros((2 * n + 1, 2 * n + 1))
    values[1:-1, 1:-1] = idstn(coeff, type=1, norm="ortho")
    return values


def _masked_sparse_sample(solver, generator):
    """Exact lattice GFF on a mask: ``sqrt(2 pi) L^{-1} D^T w`` with white ``w``."""
    w = generator.standard_normal(solver.Dt.shape[1])
    values = np.zeros(solver.mask.shape)
    values[solver.nodes] = math.sqrt(_TWO_PI) * solver.lu.solve(solver.Dt @ w)
    return values


def build_gff(domain, seed, modes=None, method="auto"):
    """Sample a zero-boundary GFF with covariance ``2*pi*G`` on ``domain``.

    Parameters
    ----------
    domain : DomainSpec
    seed : int
        The sample is a deterministic function of ``(domain, seed, modes)``.
    modes : int, optional
        Spectral truncation (square only): keep sine modes ``k, l <= modes``.
    method : {"auto", "spectral", "sparse"}
        ``auto`` uses sine synthesis on the square and a sparse precision
        factorisation on the disc. ``sparse`` on the square gives an
        independent sampler with the same law.
    """
    full = 2 * domain.n - 1
    if modes is not None:
        if domain.shape != SQUARE:
            raise ConfigurationError("spectral truncation is only available on the square")
        if int(modes) != modes or not 1 <= modes <= full:
            raise ConfigurationError(f"modes must be an integer in [1, {full}] at n={domain.n}")
    if method not in ("auto", "spectral", "sparse"):
        raise ConfigurationError(f"unknown GFF method {method!r}")
    generator = make_rng(seed)
    if domain.shape == SQUARE and method in ("auto", "spectral"):
        values = _spectral_square_sample(domain.n, generator, modes)
        truncation = full if modes is None else int(modes)
    else:
        if method == "spectral":
            raise ConfigurationError("spectral synthesis requires the square domain")
        solver = _domain_solver(domain)
        values = _masked_sparse_sample(solver, generator)
        truncation = int(solver.L.shape[0])
    return GridField(domain, values, kind="gff", seed=int(seed), truncation=truncation)


# ---------------------------------------------------------------------------
# circle averages


def quadrature_points(eps, spacing):
    return max(64, int(math.ceil(8.0 * eps / spacing)))


def _bilinear(values, n, px, py):
    last = 2 * n - 1
    u = (px + 1.0) * n
    v = (py + 1.0) * n
    i = np.clip(np.floor(u).astype(np.intp), 0, last)
    j = np.clip(np.floor(v).astype(np.intp), 0, last)
    fu = u - i
    fv = v - j
    flat = values.ravel()
    stride = values.shape[1]
    k = i * stride + j
    a = flat[k]
    b = flat[k + stride]
    c = flat[k + 1]
    d = flat[k + stride + 1]
    return (a + fu * (b - a)) * (1.0 - fv) + (c + fu * (d - c)) * fv


def _check_radius(domain, eps):
    if not eps > 0 or not math.isfinite(eps):
        raise ConfigurationError(f"circle radius must be positive, got {eps}")
    if eps < domain.circle_floor * (1 - 1e-12):
        raise ConfigurationError(
            f"radius {eps:g} is below the floor {domain.circle_floor:g} (4 lattice spacings)"
        )


def circle_averages(field, centers, eps):
    """Circle averages of ``field`` at radius ``eps`` around each center.

    Uses ``max(64, ceil(8 eps / dx))`` equispaced points and bilinear
    interpolation. Raises :class:`DomainError` naming the first center whose
    circle leaves the domain.
    """
    domain = field.domain
    _check_radius(domain, eps)
    pts = check_points(centers, "centers")
    dist = domain.boundary_distance(pts)
    bad = np.nonzero(dist < eps * (1 - 1e-12))[0]
    if bad.size:
        k = int(bad[0])
        raise DomainError(
            f"circle of radius {eps:g} around center #{k} {tuple(pts[k])} leaves the domain",
        )
    m = quadrature_points(eps, domain.spacing)
    theta = 2.0 * np.pi * np.arange(m) / m
    ox, oy = eps * np.cos(theta), eps * np.sin(theta)
    out = np.empty(len(pts))
    chunk = max(1, (1 << 20) // m)
    for s in range(0, len(pts), chunk):
        p = pts[s : s + chunk]
        px = p[:, 0:1] + ox
        py = p[:, 1:2] + oy
        out[s : s + chunk] = _bilinear(field.values, domain.n, px, py).mean(axis=1)
    return out


def circle_average(field, z, eps):
    """Average of ``field`` over the circle of radius ``eps`` about ``z``."""
    z = check_point(z)
    return float(circle_averages(field, z[None, :], eps)[0])


def circle_weights(domain, z, eps):
    """Full-grid weights ``W`` with ``circle_average(h, z, eps) == sum(W * h)``."""
    z = check_point(z)
    _check_radius(domain, eps)
    if domain.boundary_distance(z) < eps * (1 - 1e-12):
        raise DomainError(f"circle of radius {eps:g} around {tuple(z)} leaves the domain")
    m = quadrature_points(eps, domain.spacing)
    theta = 2.0 * np.pi * np.arange(m) / m
    n = domain.n
    u = (z[0] + eps * np.cos(theta) + 1.0) * n
    v = (z[1] + eps * np.sin(theta) + 1.0) * n
    i = np.clip(np.floor(u).astype(np.intp), 0, 2 * n - 1)
    j = np.clip(np.floor(v).astype(np.intp), 0, 2 * n - 1)
    fu, fv = u - i, v - j
    W = np.zeros((domain.size, domain.size))
    for di, dj, w in ((0, 0, (1 - fu) * (1 - fv)), (1, 0, fu * (1 - fv)), (0, 1, (1 - fu) * fv), (1, 1, fu * fv)):
        np.add.at(W, (i + di, j + dj), w / m)
    return W


def exact_circle_covariance(domain, z1, eps1, z2, eps2):
    """Exact lattice covariance ``E[h_eps1(z1) h_eps2(z2)]`` of the lattice GFF."""
    W1 = circle_weights(domain, z1, eps1)
    W2 = circle_weights(domain, z2, eps2)
    return float(np.sum(W1 * green_apply(domain, W2)))


@dataclass(frozen=True)
class CircleAverageLadder:
    center: np.ndarray
    radii: np.ndarray
    averages: np.ndarray

    def __post_init__(self):
        if np.any(np.diff(self.radii) >= 0):
            raise ConfigurationError("ladder radii must be strictly decreasing")


def geometric_radii(eps_max, eps_min, ratio):
    if not 0 < ratio < 1:
        raise ConfigurationError(f"ladder ratio must lie in (0, 1), got {ratio}")
    if not 0 < eps_min <= eps_max:
        raise ConfigurationError(f"need 0 < eps_min <= eps_max, got {eps_min}, {eps_max}")
    radii = [float(eps_max)]
    while radii[-1] * ratio >= eps_min * (1 - 1e-9):
        radii.append(radii[-1] * ratio)
    return np.array(radii)


def circle_average_ladder(field, z, eps_max, eps_min, ratio=0.5):
    """Circle averages at ``z`` over the geometric radii ``eps_max * ratio**k >= eps_min``."""
    z = check_point(z)
    radii = geometric_radii(eps_max, eps_min, ratio)
    averages = np.array([circle_average(field, z, r) for r in radii])
    return CircleAverageLadder(center=z, radii=radii, averages=averages)


def ladder_averages(field, centers, radii):
    """Circle averages for many centers at once; shape ``(len(centers), len(radii))``."""
    pts = check_points(centers, "centers")
    return np.column_stack([circle_averages(field, pts, r) for r in radii])


# ---------------------------------------------------------------------------
# conformal radius of the square


@lru_cache(maxsize=1)
def _square_conformal_spline():
    # log C(z) = phi_z(z), phi_z the harmonic extension of y -> log|z - y|
    nt = 64
    N = 2 * nt
    coords = (np.arange(N + 1) - nt) / nt
    inner = coords[1:-1]
    half = np.arange(0, nt - 1, 2)  # table points at multiples of 1/32 in [0, 31/32)
    pairs = [(a, b) for a in half for b in half if b <= a]
    table = np.zeros((half.size, half.size))
    pos = {k: t for t, k in enumerate(half)}
    chunk = 64
    for s in range(0, len(pairs), chunk):
        batch = pairs[s : s + chunk]
        z = np.array([[coords[nt + a], coords[nt + b]] for a, b in batch])
        rhs = np.zeros((len(batch), N - 1, N - 1))
        zx, zy = z[:, 0, None], z[:, 1, None]
        rhs[:, 0, :] += 0.5 * np.log((zx + 1.0) ** 2 + (zy - inner) ** 2)
        rhs[:, -1, :] += 0.5 * np.log((zx - 1.0) ** 2 + (zy - inner) ** 2)
        rhs[:, :, 0] += 0.5 * np.log((zx - inner) ** 2 + (zy + 1.0) ** 2)
        rhs[:, :, -1] += 0.5 * np.log((zx - inner) ** 2 + (zy - 1.0) ** 2)
        u = _square_green_apply(nt, rhs)
        for k, (a, b) in enumerate(batch):
            val = u[k, nt + a - 1, nt + b - 1]
            table[pos[a], pos[b]] = table[pos[b], pos[a]] = val
    x = coords[nt + half]
    full_x = np.concatenate([-x[:0:-1], x])
    full = np.zeros((full_x.size, full_x.size))
    idx = np.concatenate([np.arange(half.size)[:0:-1], np.arange(half.size)])
    full[:] = table[np.ix_(idx, idx)]
    edge = np.log(1.0 - full_x**2)
    smooth = full - edge[:, None] - edge[None, :]
    lim = float(full_x[-1])
    return RectBivariateSpline(full_x, full_x, smooth, kx=3, ky=3), lim


def _square_log_conformal_radius(points):
    spline, lim = _square_conformal_spline()
    pts = np.asarray(points, dtype=float)
    x = np.clip(pts[..., 0], -lim, lim)
    y = np.clip(pts[..., 1], -lim, lim)
    smooth = spline.ev(x, y)
    return smooth + np.log(1.0 - x**2) + np.log(1.0 - y**2)


# ---------------------------------------------------------------------------
# the exactly scale-invariant field Y


def _check_eps(eps):
    if not isinstance(eps, (int, float)) or not 0 < eps <= 1:
        raise RangeError(f"regularisation scale must lie in (0, 1], got {eps!r}")
    return float(eps)


def y_covariance_from_distance(d, eps):
    eps = _check_eps(eps)
    d = np.asarray(d, dtype=float)
    out = np.zeros_like(d)
    mid = (d >= eps) & (d <= 1.0)
    out[mid] = -np.log(d[mid])
    near = d < eps
    out[near] = math.log(1.0 / eps) + 2.0 * (1.0 - np.sqrt(d[near] / eps))
    return out


def y_covariance(x, y, eps):
    """Covariance of the white-noise-regularised field ``Y_eps`` at ``x`` and ``y``."""
    d = float(np.hypot(*(check_point(x) - check_point(y))))
    return float(y_covariance_from_distance(np.array(d), eps))


def y_cholesky(points, eps):
    """Lower Cholesky factor of the ``Y_eps`` covariance on ``points``.

    Walks the jitter ladder and returns ``(factor, jitter)``.
    """
    pts = check_points(points)
    if len(pts) > MAX_DENSE_POINTS:
        raise ConfigurationError(
            f"{len(pts)} points exceed the dense factorisation limit {MAX_DENSE_POINTS}"
        )
    C = y_covariance_from_distance(cdist(pts, pts), eps)
    diag = np.arange(len(pts))
    for jitter in JITTER_LADDER:
        C[diag, diag] = math.log(1.0 / eps) + 2.0 + jitter
        try:
            return cholesky(C, lower=True, check_finite=False), jitter
        except LinAlgError:
            continue
    raise NumericalError(
        "Y covariance is not positive definite after the jitter ladder",
        jitter=JITTER_LADDER[-1],
        points=len(pts),
    )


@dataclass(frozen=True, eq=False)
class PointField:
    """A Gaussian field sampled at scattered points."""

    points: np.ndarray
    values: np.ndarray
    eps: float
    seed: int | None
    jitter: float
    kind: str = "y-field"


def build_y_field(points, eps, seed):
    """Sample ``Y_eps`` at ``points`` by dense Cholesky factorisation."""
    factor, jitter = y_cholesky(points, eps)
    z = make_rng(seed).standard_normal(factor.shape[0])
    return PointField(
        points=check_points(points), values=factor @ z, eps=float(eps), seed=int(seed), jitter=jitter
    )


# ---------------------------------------------------------------------------
# domain Markov decomposition


@lru_cache(maxsize=64)
def _ball_solver(domain, ci, cj, radius):
    c = domain.coords
    X, Y = np.meshgrid(c, c, indexing="ij")
    mask = (X - c[ci]) ** 2 + (Y - c[cj]) ** 2 < radius**2 * (1 - 1e-12)
    return _MaskSolver(mask)


def _snap_center(domain, center):
    # discs are centred on the nearest lattice node so solvers can be reused
    i, j = domain.nearest_node(center)
    return i, j


def _check_ball(domain, center, radius):
    center = check_point(center)
    if radius < DISC_FLOOR * domain.spacing * (1 - 1e-12):
        raise ConfigurationError(
            f"decomposition radius {radius:g} is below {DISC_FLOOR} lattice spacings"
        )
    if domain.boundary_distance(center) < radius * (1 - 1e-12):
        raise DomainError(f"disc B({tuple(center)}, {radius:g}) is not inside the domain")
    return center


def _harmonic_solution(field, center, radius, tol=1e-8):
    domain = field.domain
    ci, cj = _snap_center(domain, center)
    solver = _ball_solver(domain, ci, cj, float(radius))
    rhs = solver.boundary_rhs(field.values)
    u = solver.lu.solve(rhs)
    resid = float(np.max(np.abs(solver.L @ u - rhs))) if u.size else 0.0
    scale = max(1.0, float(np.max(np.abs(rhs))) if rhs.size else 1.0)
    if not np.all(np.isfinite(u)) or resid > tol * scale:
        raise NumericalError("harmonic extension did not converge", residual=resid)
    return solver, u, (ci, cj)


def harmonic_decompose(field, center, radius):
    """Split ``field`` into its harmonic projection on ``B(center, radius)`` and the rest.

    The harmonic part solves the discrete Dirichlet problem on the lattice
    disc with the field's own values as boundary data and equals the field
    outside; the bulk part is the difference and vanishes outside the disc.
    """
    center = _check_ball(field.domain, center, radius)
    solver, u, _ = _harmonic_solution(field, center, radius)
    harmonic = np.array(field.values)
    harmonic[solver.nodes] = u
    bulk = np.zeros_like(harmonic)
    bulk[solver.nodes] = field.values[solver.nodes] - u
    meta = {"center": tuple(map(float, center)), "radius": float(radius)}
    return (
        GridField(field.domain, harmonic, kind="harmonic-part", seed=field.seed, meta=meta),
        GridField(field.domain, bulk, kind="bulk-part", seed=field.seed, meta=meta),
    )


def sup_harmonic(field, x, r):
    """Supremum over ``B(x, sqrt(r))`` of the harmonic projection onto ``B(x, 2 sqrt(r))``."""
    if not r > 0:
        raise ConfigurationError(f"scale r must be positive, got {r}")
    rho = math.sqrt(r)
    x = _check_ball(field.domain, x, 2 * rho)
    solver, u, (ci, cj) = _harmonic_solution(field, x, 2 * rho)
    c = field.domain.coords
    I, J = solver.nodes
    inner = (c[I] - c[ci]) ** 2 + (c[J] - c[cj]) ** 2 <= rho**2 * (1 + 1e-12)
    return float(np.max(u[inner]))


# ---------------------------------------------------------------------------
# Cameron-Martin rooting


@lru_cache(maxsize=16)
def _rooting_profile(domain, i, j):
    rhs = np.zeros((domain.size, domain.size))
    rhs[i, j] = 1.0
    g = green_apply(domain, rhs)
    # replace the finite lattice diagonal by the value at distance dx
    g[i, j] = 0.25 * (g[i + 1, j] + g[i - 1, j] + g[i, j + 1] + g[i, j - 1])
    g.setflags(write=False)
    return g


def rooting_profile(domain, z0):
    """``2*pi*G(., z0)`` on the lattice, with the singular node regularised."""
    z0 = check_point(z0, "z0")
    i, j = domain.nearest_node(z0)
    if not domain.interior_mask()[i, j] or domain.boundary_distance(z0) <= domain.spacing:
        raise DomainError(f"root {tuple(z0)} is not an interior point")
    for di, dj in ((1, 0), (-1, 0), (0, 1), (0, -1)):
        if not domain.interior_mask()[i + di, j + dj]:
            raise DomainError(f"root {tuple(z0)} is adjacent to the boundary")
    return _rooting_profile(domain, i, j)


def rooted_shift(field, z0, alpha):
    """Add the log singularity ``alpha * 2*pi*G(., z0)`` to ``field``.

    This is the Cameron-Martin shift producing the law of the field seen from
    an ``alpha``-thick point at ``z0``; only the mean changes.
    """
    alpha = check_exponent_parameter(alpha, "alpha")
    z0 = check_point(z0, "z0")
    profile = rooting_profile(field.domain, z0)
    values = field.values if alpha == 0 else field.values + alpha * profile
    i, j = field.domain.nearest_node(z0)
    root = (tuple(map(float, field.domain.node_position(i, j))), alpha)
    return GridField(field.domain, values, kind="rooted", seed=field.seed,
                     truncation=field.truncation, root=root)
