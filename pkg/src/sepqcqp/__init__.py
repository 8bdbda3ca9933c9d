"""Global solutions of QCQPs whose constraints act on disjoint blocks.

A strong-duality certificate (congruence plus a signed-graph test) tells
when the Lagrangian dual is exact; dual ascent then solves the problem and
recovers a primal point. Also included: rank-one extraction, a brute-force
grid oracle and robust least squares with per-column budgets.
"""

from .certify import Certificate, CertificateCase, CertificateStatus, certify, sign_search, verify_certificate
from .congruence import CongruenceSystem, build_congruence
from .dual import SolverConfig, project_W, recover_primal, solve_dual_ascent
from .model import (
    BlockConstraint,
    Kind,
    SeparableQcqp,
    Solution,
    Status,
    evaluate,
    load_problem,
    save_problem,
    slater_check,
)
from .oracle import GridSpec, duality_gap_report, grid_global_min
from .rank1 import TraceSystem, extract_rank1, lift_to_primal
from .rls import RlsInstance, inner_max, rls_fit

__version__ = "0.1.0"

__all__ = [
    "BlockConstraint",
    "Certificate",
    "CertificateCase",
    "CertificateStatus",
    "CongruenceSystem",
    "GridSpec",
    "Kind",
    "RlsInstance",
    "SeparableQcqp",
    "Solution",
    "SolverConfig",
    "Status",
    "TraceSystem",
    "build_congruence",
    "certify",
    "duality_gap_report",
    "evaluate",
    "extract_rank1",
    "grid_global_min",
    "inner_max",
    "lift_to_primal",
    "load_problem",
    "project_W",
    "recover_primal",
    "rls_fit",
    "save_problem",
    "sign_search",
    "slater_check",
    "solve_dual_ascent",
    "verify_certificate",
]
