"""Backward Ricci flow on locally homogeneous 4-geometries.

Curvature from structure constants, a catalog of the homogeneous classes
with their flow equations and exact solutions, an adaptive integrator with
singularity detection, and asymptotic analysis of the resulting flows.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .catalog import ClassId, ClassParams, EndBehavior, InitialData, get_spec
from .integrator import IntegratorOptions, Termination, Trajectory, integrate, integrate_general
from .lie_curvature import DiagonalMetric, StructureConstants, ricci, sectional

__all__ = [
    "ClassId",
    "ClassParams",
    "DiagonalMetric",
    "EndBehavior",
    "InitialData",
    "IntegratorOptions",
    "StructureConstants",
    "Termination",
    "Trajectory",
    "__version__",
    "get_spec",
    "integrate",
    "integrate_general",
    "ricci",
    "sectional",
]
