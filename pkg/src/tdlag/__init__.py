"""Mechanics of time-dependent Lagrangians on R x TM: semisprays, connections,
second-order trivializations, forced and constrained motion."""
from . import atlas, catalog, diffkernel, dynamics, lagrangian, laws, riemann, semispray
from .atlas import Chart, Transition
from .diffkernel import Box, Dual, Jet, ScalarField, TangentSample, VectorMap
from .dynamics import ExternalForce, IntegratorConfig, Trajectory, integrate
from .lagrangian import TimeLagrangian
from .semispray import ConnectionField, SemisprayField

__version__ = "0.1.0"

__all__ = [
    "Box",
    "Chart",
    "ConnectionField",
    "Dual",
    "ExternalForce",
    "IntegratorConfig",
    "Jet",
    "ScalarField",
    "SemisprayField",
    "TangentSample",
    "TimeLagrangian",
    "Trajectory",
    "Transition",
    "VectorMap",
    "atlas",
    "catalog",
    "diffkernel",
    "dynamics",
    "integrate",
    "lagrangian",
    "laws",
    "riemann",
    "semispray",
]
