"""Liouville Brownian motion on lattice Gaussian free fields.

Fields, Brownian paths, regularised clocks, exponent estimators, and a
Monte-Carlo harness for the moment and tail bounds behind the multifractal
description of the process.
"""

from ._validation import (
    ConfigurationError,
    DomainError,
    LiouvilleError,
    NumericalError,
    RangeError,
)
from .clock import (
    ClockProcess,
    TimeMeasure,
    clock_limit,
    clock_process,
    inverse_clock,
    lbm_trajectory,
    sample_time,
    time_measure,
)
from .config import ExperimentConfig
from .field import (
    DomainSpec,
    GridField,
    build_gff,
    build_y_field,
    circle_average,
    circle_average_ladder,
    harmonic_decompose,
    rooted_shift,
)
from .multifractal import (
    BoxCountingDimension,
    DiffusivityExponent,
    LocalClockExponent,
    ThicknessEstimator,
    TimeSet,
    box_dimension,
    clock_image,
    diffusivity,
    formula_beta,
    formula_diffusivity,
    formula_thick_dimension,
    formula_time_dimension,
    local_clock_exponent,
    thick_time_set,
    thickness,
)
from .path import BrownianPath, sample_path

__version__ = "0.1.0"
