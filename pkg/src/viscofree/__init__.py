"""Viscoelastic free-surface flow in Lagrangian coordinates by fixed-point iteration."""
from .constitutive import Giesekus, JohnsonSegalman, PTTExponential, PTTLinear, make_law
from .fixed_point import (FlowState, IterationReport, Problem, RHSData, SolverSettings,
                          compatibility_check, error_terms, full_residual, invert_P1,
                          march_windows, solve_full, zeroth_order_source)
from .geometry import DomainProfile, Mesh, build_mesh
from .scaling import DimensionlessParams, PhysicalParams, nondimensionalize

__version__ = "0.1.0"
