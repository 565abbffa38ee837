"""LP-based branch and bound for programs with binary variables.

Node selection is best-bound (ties broken by creation order), branching is
most-fractional (ties to the lowest variable index). The incumbent is
returned once the proof gap drops below the configured absolute tolerance.
"""

from __future__ import annotations

import heapq
import math
import time

import numpy as np

from ..errors import MalformedProgram
from ..program import ProgramDescription
from .simplex import (
    INFEASIBLE,
    ITERATION_LIMIT,
    NODE_LIMIT,
    OPTIMAL,
    UNBOUNDED,
    SolverConfig,
    SolveResult,
    solve_lp,
)


def _check_integrality(program: ProgramDescription):
    for var in program.variables:
        if var.binary:
            lo = 0.0 if var.lower is None else var.lower
            hi = 1.0 if var.upper is None else var.upper
            if lo < -1e-9 or hi > 1.0 + 1e-9:
                raise MalformedProgram(
                    f"binary variable {var.name!r} must have bounds within [0, 1]"
                )


def _min_normalized(program: ProgramDescription, objective: float) -> float:
    return objective if program.objective_sense == "min" else -objective


def solve_milp(program: ProgramDescription, config: SolverConfig | None = None) -> SolveResult:
    """Solve a binary MILP by LP-based branch and bound.

    Only binary integrality flags are supported. A NodeLimit status carries
    the best incumbent and the proven bound in ``stats``.
    """
    config = config or SolverConfig()
    program.validate()
    _check_integrality(program)
    binaries = [j for j, v in enumerate(program.variables) if v.binary]
    start = time.perf_counter()

    if not binaries:
        return solve_lp(program, config, bound_overrides={})

    sense = program.objective_sense
    incumbent: SolveResult | None = None
    incumbent_val = math.inf  # min-normalized
    counter = 0
    heap: list = []
    nodes_solved = 0
    total_iters = 0

    root = solve_lp(program, config, bound_overrides={})
    nodes_solved += 1
    total_iters += root.stats.get("iterations", 0)
    if root.status == UNBOUNDED:
        return SolveResult(status=UNBOUNDED, stats={"nodes": nodes_solved})
    if root.status == INFEASIBLE:
        return SolveResult(status=INFEASIBLE, stats={"nodes": nodes_solved})
    if root.status == ITERATION_LIMIT:
        return SolveResult(status=ITERATION_LIMIT, stats={"nodes": nodes_solved})
    heapq.heappush(heap, (_min_normalized(program, root.objective), counter, {}, root))

    def fractional_index(result: SolveResult):
        values = [result.assignment[program.variables[j].name] for j in binaries]
        dist = [min(v - math.floor(v), math.ceil(v) - v) for v in values]
        best, best_j = 0.0, None
        for j, d in zip(binaries, dist):
            if d > 1e-6 and d > best + 1e-12:
                best, best_j = d, j
        return best_j

    best_bound = _min_normalized(program, root.objective)
    status = OPTIMAL
    while heap:
        bound, _, overrides, rel = heapq.heappop(heap)
        best_bound = bound
        if incumbent is not None and bound >= incumbent_val - config.gap_tol:
            # Best-bound order: every remaining node is at least this weak.
            best_bound = min(bound, incumbent_val)
            break
        branch_var = fractional_index(rel)
        if branch_var is None:
            val = _min_normalized(program, rel.objective)
            if val < incumbent_val - 1e-12:
                incumbent, incumbent_val = rel, val
            continue
        if nodes_solved >= config.node_limit:
            status = NODE_LIMIT
            break
        for fixed in (0.0, 1.0):
            child_over = dict(overrides)
            child_over[branch_var] = (fixed, fixed)
            child = solve_lp(program, config, bound_overrides=child_over)
            nodes_solved += 1
            total_iters += child.stats.get("iterations", 0)
            if child.status == INFEASIBLE:
                continue
            if child.status != OPTIMAL:
                status = NODE_LIMIT if child.status == ITERATION_LIMIT else child.status
                continue
            child_bound = _min_normalized(program, child.objective)
            if incumbent is not None and child_bound >= incumbent_val - config.gap_tol:
                continue
            counter += 1
            heapq.heappush(heap, (child_bound, counter, child_over, child))
    else:
        best_bound = incumbent_val

    wall = time.perf_counter() - start
    stats = {
        "nodes": nodes_solved,
        "iterations": total_iters,
        "wall_time": wall,
        "best_bound": None if math.isinf(best_bound) else (
            best_bound if sense == "min" else -best_bound
        ),
    }
    if incumbent is None:
        final = INFEASIBLE if status == OPTIMAL else status
        return SolveResult(status=final, stats=stats)

    stats["gap"] = abs(incumbent_val - best_bound)
    assignment = dict(incumbent.assignment)
    # Snap near-integral binaries for reporting; the LP already met 1e-6.
    for j in binaries:
        name = program.variables[j].name
        assignment[name] = float(round(assignment[name]))
    result = SolveResult(
        status=status if status in (NODE_LIMIT,) else OPTIMAL,
        objective=incumbent.objective,
        assignment=assignment,
        dual=None,
        stats=stats,
    )
    _audit(program, result, config)
    return result


def _audit(program: ProgramDescription, result: SolveResult, config: SolverConfig):
    """Defensive re-check: constraints within 1e-7, integrality within 1e-6."""
    x = np.array([result.assignment[v.name] for v in program.variables])
    a, rels, rhs = program.matrix()
    ax = a @ x if program.constraints else np.zeros(0)
    scale = 1.0 + float(np.abs(rhs).max(initial=0.0))
    for i, rel in enumerate(rels):
        resid = ax[i] - rhs[i]
        ok = (
            resid <= 1e-7 * scale
            if rel == "<="
            else (resid >= -1e-7 * scale if rel == ">=" else abs(resid) <= 1e-7 * scale)
        )
        if not ok:
            raise AssertionError(f"MILP solution violates constraint {i}: residual {resid}")
    for j, var in enumerate(program.variables):
        if var.binary and abs(x[j] - round(x[j])) > 1e-6:
            raise AssertionError(f"binary variable {var.name} is fractional: {x[j]}")
