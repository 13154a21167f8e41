"""Triple-junction laboratory for the vector Allen-Cahn equation.

Heteroclinic connections and their actions, relaxed planar triods, the
stress tensor and its flux through circles and spheres, and contact-angle
checks against the force balance of the three interfaces.
"""
from . import connect, field, flux, potential, stress, young
from .connect import ConnectionPath, solve_connection
from .errors import (
    ConfigError,
    ConvergenceError,
    DependencyError,
    DomainError,
    ExtractionError,
    GeometryError,
    InstabilityError,
    InvalidArgumentError,
    NoBalanceError,
    ScheduleViolationError,
    TriodLabError,
)
from .field import FieldSampler, GridField, init_triod, relax
from .flux import flux_circle_2d, flux_sphere_3d, make_surgery_plan
from .potential import TripleWellSpec, double_well_spec, equilateral_spec
from .young import measure, predict_angles

__version__ = "0.1.0"
