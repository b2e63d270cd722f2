"""Boundary integral solver for the 2D unsteady Stokes equations using the
combined source (harmonic plus heat single layer) representation."""
from .geom import BoundaryGrid, CurveSpec, discretize
from .solver import GmresError, TimeScheme, eval_velocity, gmres, march
from .testbed import ErrorMetric, ExactSolutionCfg, error_report, exact_velocity, provider

__version__ = "0.1.0"

__all__ = [
    "BoundaryGrid", "CurveSpec", "discretize",
    "GmresError", "TimeScheme", "eval_velocity", "gmres", "march",
    "ErrorMetric", "ExactSolutionCfg", "error_report", "exact_velocity", "provider",
]
