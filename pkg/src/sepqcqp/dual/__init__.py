"""Dual function, the feasible multiplier set and the dual ascent solvers."""

from .ascent import (
    METHODS,
    TRACE_COLUMNS,
    DualIterate,
    SolverConfig,
    kkt_residual,
    solve_dual_ascent,
    step_size,
)
from .function import DualInfeasibleError, dual_value, lagrangian_argmin, lagrangian_gradient
from .inner import InnerResult, augmented_argmin, default_prox, flexa_inner
from .projection import (
    EmptySpectrahedronError,
    ProjectionError,
    in_w,
    lagrangian_hessian,
    project_W,
    strict_feasibility_probe,
)
from .recovery import RecoveryError, recover_primal

__all__ = [
    "METHODS",
    "TRACE_COLUMNS",
    "DualInfeasibleError",
    "DualIterate",
    "EmptySpectrahedronError",
    "InnerResult",
    "ProjectionError",
    "RecoveryError",
    "SolverConfig",
    "augmented_argmin",
    "default_prox",
    "dual_value",
    "flexa_inner",
    "in_w",
    "kkt_residual",
    "lagrangian_argmin",
    "lagrangian_gradient",
    "lagrangian_hessian",
    "project_W",
    "recover_primal",
    "solve_dual_ascent",
    "step_size",
    "strict_feasibility_probe",
]
