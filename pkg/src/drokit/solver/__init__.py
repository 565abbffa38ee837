"""Built-in LP/MILP engine: revised simplex, branch and bound, MPS interop."""

from .branch_bound import solve_milp
from .mps import export_mps, import_mps
from .simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    NODE_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    SolveResult,
    SolverConfig,
    solve_lp,
    verify_certificate,
)

__all__ = [
    "INFEASIBLE",
    "ITERATION_LIMIT",
    "NODE_LIMIT",
    "OPTIMAL",
    "UNBOUNDED",
    "SolveResult",
    "SolverConfig",
    "solve_lp",
    "solve_milp",
    "verify_certificate",
    "export_mps",
    "import_mps",
]
