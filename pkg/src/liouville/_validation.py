"""Exception types and small argument checkers shared across the package."""

from __future__ import annotations

import math
from numbers import Real

import numpy as np


class LiouvilleError(Exception):
    """Base class for errors raised by this package."""


class ConfigurationError(LiouvilleError, ValueError):
    """Invalid parameters or an unsupported combination of settings."""


class DomainError(LiouvilleError, ValueError):
    """A geometric request (circle, disc, point) does not fit in the domain."""


class RangeError(LiouvilleError, ValueError):
    """A scalar argument lies outside its admissible range."""


class NumericalError(LiouvilleError, RuntimeError):
    """A factorization or linear solve failed.

    ``detail`` carries diagnostic numbers (jitter tried, residual, ...).
    """

    def __init__(self, message, **detail):
        super().__init__(message)
        self.detail = detail


def check_point(z, name="point"):
    z = np.asarray(z, dtype=float)
    if z.shape != (2,) or not np.all(np.isfinite(z)):
        raise ConfigurationError(f"{name} must be a finite planar point, got {z!r}")
    return z


def check_points(points, name="points"):
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1 and pts.shape == (2,):
        pts = pts[None, :]
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ConfigurationError(f"{name} must have shape (k, 2), got {pts.shape}")
    if not np.all(np.isfinite(pts)):
        raise ConfigurationError(f"{name} contains non-finite coordinates")
    return pts


def check_exponent_parameter(value, name):
    """Thickness / coupling parameters live in [0, 2)."""
    if not isinstance(value, Real) or not math.isfinite(value):
        raise RangeError(f"{name} must be a finite real, got {value!r}")
    if not 0.0 <= value < 2.0:
        raise RangeError(f"{name} must lie in [0, 2), got {value}")
    return float(value)


def check_positive(value, name, strict=True):
    if not isinstance(value, Real) or not math.isfinite(value):
        raise ConfigurationError(f"{name} must be a finite real, got {value!r}")
    if value < 0 or (strict and value == 0):
        raise ConfigurationError(f"{name} must be {'>' if strict else '>='} 0, got {value}")
    return float(value)
