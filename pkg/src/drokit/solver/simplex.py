"""Revised simplex for bounded-variable linear programs.

The program is normalized to   min c'x', A x' = b, 0 <= x' <= u   by shifting
finite lower bounds to zero, mirroring variables that only have an upper
bound, and splitting free variables. Rows gain a slack (inequalities) and,
where the slack cannot seed a feasible start, an artificial column; a
standard two-phase method then runs with the basis held as a sparse LU
factorization (refreshed periodically) plus product-form eta updates.

Pricing is Dantzig's rule with a switch to Bland's rule after a run of
degenerate steps. Optimal results carry a dual vector recomputed from a
fresh factorization of the final basis, independent of the pivot path.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from ..errors import MalformedProgram
from ..program import GE, LE, ProgramDescription

INF = math.inf

OPTIMAL = "Optimal"
INFEASIBLE = "Infeasible"
UNBOUNDED = "Unbounded"
ITERATION_LIMIT = "IterationLimit"
NODE_LIMIT = "NodeLimit"

_AT_LOWER, _AT_UPPER, _BASIC = 0, 1, 2


@dataclass(frozen=True)
class SolverConfig:
    feasibility_tol: float = 1e-7
    optimality_tol: float = 1e-7
    gap_tol: float = 1e-6  # absolute MILP gap
    iteration_limit: int = 200_000
    node_limit: int = 200_000
    branching_rule: str = "most_fractional"
    refactor_every: int = 64
    degeneracy_threshold: int = 50

    def __post_init__(self):
        if min(self.feasibility_tol, self.optimality_tol, self.gap_tol) <= 0:
            raise ValueError("tolerances must be positive")


@dataclass(frozen=True)
class SolveResult:
    status: str
    objective: float | None = None
    assignment: dict | None = None
    dual: dict | None = None
    stats: dict = field(default_factory=dict)


class _Standardized:
    """Normalized min-form data plus the bookkeeping to map back."""

    def __init__(self, program: ProgramDescription, config: SolverConfig, bound_overrides=None):
        program.validate()
        self.program = program
        self.sense_sign = 1.0 if program.objective_sense == "min" else -1.0
        n_orig = program.n_variables
        overrides = bound_overrides or {}

        lowers = np.empty(n_orig)
        uppers = np.empty(n_orig)
        for j, var in enumerate(program.variables):
            lo, hi = overrides.get(j, (var.lower, var.upper))
            lowers[j] = -INF if lo is None else lo
            uppers[j] = INF if hi is None else hi
        self.trivially_infeasible = bool(np.any(lowers > uppers))

        # Variable transforms: ("shift", col, offset) means x = offset + x',
        # ("flip", col, offset) means x = offset - x', ("split", cp, cm).
        self.var_map = []
        cols_lo = []  # per new column: upper bound
        c_orig = program.objective_vector() * self.sense_sign
        c_cols = []
        self.const_offset = 0.0
        col_of = {}
        for j in range(n_orig):
            lo, hi = lowers[j], uppers[j]
            if lo > -INF:
                self.var_map.append(("shift", len(cols_lo), lo))
                col_of[j] = (len(cols_lo), 1.0, lo)
                cols_lo.append(hi - lo)
                c_cols.append(c_orig[j])
                self.const_offset += c_orig[j] * lo
            elif hi < INF:
                self.var_map.append(("flip", len(cols_lo), hi))
                col_of[j] = (len(cols_lo), -1.0, hi)
                cols_lo.append(INF)
                c_cols.append(-c_orig[j])
                self.const_offset += c_orig[j] * hi
            else:
                cp, cm = len(cols_lo), len(cols_lo) + 1
                self.var_map.append(("split", cp, cm))
                col_of[j] = None
                cols_lo.extend([INF, INF])
                c_cols.extend([c_orig[j], -c_orig[j]])
        n_struct = len(cols_lo)

        # Assemble rows in the transformed variables.
        m = len(program.constraints)
        rows_ix, cols_ix, vals = [], [], []
        rhs = np.empty(m)
        rels = []
        for i, con in enumerate(program.constraints):
            b = con.rhs
            for j, a in con.coeffs:
                mapping = self.var_map[j]
                if mapping[0] == "shift":
                    rows_ix.append(i); cols_ix.append(mapping[1]); vals.append(a)
                    b -= a * mapping[2]
                elif mapping[0] == "flip":
                    rows_ix.append(i); cols_ix.append(mapping[1]); vals.append(-a)
                    b -= a * mapping[2]
                else:
                    rows_ix.append(i); cols_ix.append(mapping[1]); vals.append(a)
                    rows_ix.append(i); cols_ix.append(mapping[2]); vals.append(-a)
            rhs[i] = b
            rels.append(con.rel)

        # Slacks, row flips to get rhs >= 0, then artificials where needed.
        self.slack_of_row = np.full(m, -1, dtype=int)
        next_col = n_struct
        for i, rel in enumerate(rels):
            if rel in (LE, GE):
                rows_ix.append(i); cols_ix.append(next_col)
                vals.append(1.0 if rel == LE else -1.0)
                self.slack_of_row[i] = next_col
                cols_lo.append(INF)
                c_cols.append(0.0)
                next_col += 1
        self.flip = np.ones(m)
        a_tmp = sparse.csr_matrix(
            (vals, (rows_ix, cols_ix)), shape=(m, next_col)
        ).tolil()
        for i in range(m):
            if rhs[i] < 0:
                a_tmp[i, :] = -a_tmp[i, :]
                rhs[i] = -rhs[i]
                self.flip[i] = -1.0
        self.art_of_row = np.full(m, -1, dtype=int)
        art_cols = []
        for i in range(m):
            s = self.slack_of_row[i]
            slack_ok = s >= 0 and a_tmp[i, s] > 0
            if not slack_ok:
                self.art_of_row[i] = next_col
                art_cols.append((i, next_col))
                cols_lo.append(INF)
                c_cols.append(0.0)
                next_col += 1
        if art_cols:
            a_tmp.resize((m, next_col))
            for i, col in art_cols:
                a_tmp[i, col] = 1.0

        self.A = a_tmp.tocsc()
        self.b = rhs
        self.upper = np.array(cols_lo, dtype=float)
        self.c = np.array(c_cols, dtype=float)
        self.n_struct = n_struct
        self.n_total = next_col
        self.m = m
        self.artificial = np.zeros(self.n_total, dtype=bool)
        for _, col in art_cols:
            self.artificial[col] = True

    def original_assignment(self, x: np.ndarray) -> dict:
        out = {}
        for j, var in enumerate(self.program.variables):
            mapping = self.var_map[j]
            if mapping[0] == "shift":
                val = mapping[2] + x[mapping[1]]
            elif mapping[0] == "flip":
                val = mapping[2] - x[mapping[1]]
            else:
                val = x[mapping[1]] - x[mapping[2]]
            out[var.name] = float(val)
        return out

    def original_objective(self, internal_value: float) -> float:
        return self.sense_sign * (internal_value + self.const_offset) + self.program.objective_constant

    def original_duals(self, y: np.ndarray) -> list:
        return [float(self.sense_sign * self.flip[i] * y[i]) for i in range(self.m)]


class _Basis:
    """LU-factorized basis with product-form (eta) updates."""

    def __init__(self, std: _Standardized):
        self.std = std
        self.lu = None
        self.etas: list = []  # (pivot_row, eta_vector)

    def refactor(self, basis: np.ndarray):
        m = self.std.m
        if m == 0:
            self.lu = None
            self.etas = []
            return
        B = self.std.A[:, basis]
        self.lu = splu(B.tocsc(), permc_spec="COLAMD")
        self.etas = []

    def ftran(self, v: np.ndarray) -> np.ndarray:
        w = self.lu.solve(v) if self.lu is not None else v.copy()
        for r, eta in self.etas:
            wr = w[r]
            if wr != 0.0:
                w = w + eta * wr
                w[r] -= wr
        return w

    def btran(self, z: np.ndarray) -> np.ndarray:
        w = z.copy()
        for r, eta in reversed(self.etas):
            w[r] = float(eta @ w)
        return self.lu.solve(w, trans="T") if self.lu is not None else w

    def push_eta(self, r: int, alpha: np.ndarray):
        eta = -alpha / alpha[r]
        eta[r] = 1.0 / alpha[r]
        self.etas.append((r, eta))


class _SimplexEngine:
    def __init__(self, std: _Standardized, config: SolverConfig):
        self.std = std
        self.cfg = config
        self.m = std.m
        self.iterations = 0
        self.state = np.full(std.n_total, _AT_LOWER, dtype=np.int8)
        self.basis = np.empty(self.m, dtype=int)
        for i in range(self.m):
            col = std.art_of_row[i] if std.art_of_row[i] >= 0 else std.slack_of_row[i]
            self.basis[i] = col
            self.state[col] = _BASIC
        self.factor = _Basis(std)
        self.factor.refactor(self.basis)
        self.beta = self._fresh_basic_values()
        self.upper = std.upper.copy()

    # -- numerical plumbing -------------------------------------------------

    def _effective_rhs(self) -> np.ndarray:
        b = self.std.b.copy()
        at_up = np.flatnonzero(self.state == _AT_UPPER)
        for j in at_up:
            col = self.std.A.getcol(j)
            b[col.indices] -= self.upper[j] * col.data
        return b

    def _fresh_basic_values(self) -> np.ndarray:
        if self.m == 0:
            return np.zeros(0)
        return self.factor.ftran(self._effective_rhs())

    def _column(self, j: int) -> np.ndarray:
        col = self.std.A.getcol(j)
        out = np.zeros(self.m)
        out[col.indices] = col.data
        return out

    def _values(self) -> np.ndarray:
        x = np.where(self.state == _AT_UPPER, np.where(np.isfinite(self.upper), self.upper, 0.0), 0.0)
        x[self.basis] = self.beta
        return x

    def _refactor(self):
        self.factor.refactor(self.basis)
        self.beta = self._fresh_basic_values()

    # -- core loop ----------------------------------------------------------

    def run_phase(self, cost: np.ndarray, iteration_budget: int) -> str:
        """Minimize cost over the current feasible basis; returns a status."""
        cfg = self.cfg
        tol_d = cfg.optimality_tol * (1.0 + float(np.abs(cost).max(initial=0.0)))
        piv_tol = 1e-9
        degen_run = 0
        bland = False
        enterable = ~(self.upper <= 0.0)  # fixed columns never enter

        while True:
            if self.iterations >= iteration_budget:
                return ITERATION_LIMIT
            y = self.factor.btran(cost[self.basis]) if self.m else np.zeros(0)
            d = cost - (self.std.A.T @ y if self.m else 0.0)
            viol_lo = (self.state == _AT_LOWER) & enterable & (d < -tol_d)
            viol_up = (self.state == _AT_UPPER) & (d > tol_d)
            candidates = np.flatnonzero(viol_lo | viol_up)
            if candidates.size == 0:
                if self.factor.etas:
                    self._refactor()
                    y = self.factor.btran(cost[self.basis]) if self.m else np.zeros(0)
                    d = cost - (self.std.A.T @ y if self.m else 0.0)
                    viol_lo = (self.state == _AT_LOWER) & enterable & (d < -tol_d)
                    viol_up = (self.state == _AT_UPPER) & (d > tol_d)
                    candidates = np.flatnonzero(viol_lo | viol_up)
                    if candidates.size == 0:
                        return OPTIMAL
                else:
                    return OPTIMAL

            if bland:
                q = int(candidates[0])
            else:
                q = int(candidates[np.argmax(np.abs(d[candidates]))])

            direction = 1.0 if self.state[q] == _AT_LOWER else -1.0
            alpha = self.factor.ftran(self._column(q))
            alpha_eff = direction * alpha

            # Ratio test over basic variables plus the entering bound flip.
            t_best = self.upper[q] if np.isfinite(self.upper[q]) else INF
            leave_pos = -1
            up_b = self.upper[self.basis]
            pos = alpha_eff > piv_tol
            neg = (alpha_eff < -piv_tol) & np.isfinite(up_b)
            ratios = np.full(self.m, INF)
            ratios[pos] = np.maximum(self.beta[pos], 0.0) / alpha_eff[pos]
            ratios[neg] = (up_b[neg] - np.minimum(self.beta[neg], up_b[neg])) / (-alpha_eff[neg])
            if self.m and ratios.size:
                rmin = float(ratios.min())
                if rmin < t_best:
                    tie = np.flatnonzero(ratios <= rmin + 1e-12)
                    if bland:
                        leave_pos = int(tie[np.argmin(self.basis[tie])])
                    else:
                        leave_pos = int(tie[np.argmax(np.abs(alpha_eff[tie]))])
                    t_best = max(rmin, 0.0)

            if math.isinf(t_best):
                return UNBOUNDED

            self.iterations += 1
            degen_run = degen_run + 1 if t_best <= 1e-10 else 0
            if degen_run > cfg.degeneracy_threshold:
                bland = True
            elif degen_run == 0:
                bland = False

            if leave_pos < 0:
                # Bound flip: entering variable crosses to its other bound.
                self.beta -= t_best * alpha_eff
                self.state[q] = _AT_UPPER if self.state[q] == _AT_LOWER else _AT_LOWER
                continue

            if abs(alpha[leave_pos]) < piv_tol:
                self._refactor()
                continue

            leaving = int(self.basis[leave_pos])
            self.beta -= t_best * alpha_eff
            entering_value = t_best if direction > 0 else self.upper[q] - t_best
            self.beta[leave_pos] = entering_value
            hit_lower = alpha_eff[leave_pos] > 0
            self.state[leaving] = _AT_LOWER if hit_lower else _AT_UPPER
            self.state[q] = _BASIC
            self.basis[leave_pos] = q
            self.factor.push_eta(leave_pos, alpha)
            if len(self.factor.etas) >= cfg.refactor_every:
                self._refactor()


def _certificate(std: _Standardized, engine: _SimplexEngine, cost: np.ndarray):
    """Fresh-factorization dual vector and internal dual objective."""
    if std.m == 0:
        return np.zeros(0), 0.0
    factor = _Basis(std)
    factor.refactor(engine.basis)
    y = factor.btran(cost[engine.basis])
    d = cost - std.A.T @ y
    at_up = engine.state == _AT_UPPER
    dual_internal = float(y @ std.b) + float(
        np.sum(d[at_up & np.isfinite(engine.upper)] * engine.upper[at_up & np.isfinite(engine.upper)])
    )
    return y, dual_internal


def solve_lp(
    program: ProgramDescription,
    config: SolverConfig | None = None,
    *,
    bound_overrides=None,
) -> SolveResult:
    """Solve an LP (no integrality flags honoured here).

    Returns Infeasible/Unbounded as statuses; Optimal results carry the
    assignment, the row duals (original orientation and sense) and an
    independently recomputed dual objective.
    """
    config = config or SolverConfig()
    if program.has_binaries and bound_overrides is None:
        raise MalformedProgram("program has integrality flags; use solve_milp")
    start = time.perf_counter()
    std = _Standardized(program, config, bound_overrides)
    if std.trivially_infeasible:
        return SolveResult(status=INFEASIBLE, stats={"iterations": 0, "wall_time": 0.0})
    engine = _SimplexEngine(std, config)

    # Phase 1: drive artificial columns to zero.
    if np.any(std.artificial):
        c1 = std.artificial.astype(float)
        status = engine.run_phase(c1, config.iteration_limit)
        if status == ITERATION_LIMIT:
            return SolveResult(
                status=ITERATION_LIMIT,
                stats={"iterations": engine.iterations, "phase": 1},
            )
        art_total = float(np.sum(engine._values()[std.artificial]))
        if status != OPTIMAL or art_total > config.feasibility_tol:
            return SolveResult(
                status=INFEASIBLE,
                stats={"iterations": engine.iterations, "infeasibility": art_total},
            )
        engine.upper[std.artificial] = 0.0
        engine._refactor()

    status = engine.run_phase(std.c, config.iteration_limit)
    wall = time.perf_counter() - start
    stats = {"iterations": engine.iterations, "wall_time": wall}
    if status == UNBOUNDED:
        return SolveResult(status=UNBOUNDED, stats=stats)
    if status == ITERATION_LIMIT:
        x = engine._values()
        return SolveResult(
            status=ITERATION_LIMIT,
            objective=std.original_objective(float(std.c @ x)),
            assignment=std.original_assignment(x),
            stats=stats,
        )

    engine._refactor()
    x = engine._values()
    internal_obj = float(std.c @ x)
    y, dual_internal = _certificate(std, engine, std.c)
    objective = std.original_objective(internal_obj)
    dual = {
        "rows": std.original_duals(y),
        "dual_objective": std.original_objective(dual_internal),
    }
    return SolveResult(
        status=OPTIMAL,
        objective=objective,
        assignment=std.original_assignment(x),
        dual=dual,
        stats=stats,
    )


def verify_certificate(
    program: ProgramDescription, result: SolveResult, tol: float = 1e-6
) -> dict:
    """Audit an Optimal result from the program alone.

    Recomputes the primal objective, constraint violations, reduced costs
    from the shipped row duals, dual-feasibility sign conditions, and the
    primal-dual gap. Raises AssertionError on any failure; returns a report.
    """
    if result.status != OPTIMAL:
        raise AssertionError(f"cannot verify a {result.status} result")
    x = np.array([result.assignment[v.name] for v in program.variables])
    a, rels, rhs = program.matrix()
    ax = a @ x if program.constraints else np.zeros(0)
    worst = 0.0
    for i, rel in enumerate(rels):
        if rel == LE:
            worst = max(worst, ax[i] - rhs[i])
        elif rel == GE:
            worst = max(worst, rhs[i] - ax[i])
        else:
            worst = max(worst, abs(ax[i] - rhs[i]))
    if worst > 10 * tol * (1.0 + float(np.abs(rhs).max(initial=0.0))):
        raise AssertionError(f"primal violation {worst}")

    primal = program.objective_value(result.assignment)
    if abs(primal - result.objective) > tol * (1.0 + abs(primal)):
        raise AssertionError("reported objective mismatches the assignment")

    y = np.array(result.dual["rows"])
    sign = 1.0 if program.objective_sense == "min" else -1.0
    for i, rel in enumerate(rels):
        yi = sign * y[i]
        if rel == LE and yi > tol:
            raise AssertionError(f"dual sign violated on row {i}")
        if rel == GE and yi < -tol:
            raise AssertionError(f"dual sign violated on row {i}")

    c = program.objective_vector()
    rc = c - (a.T @ y if program.constraints else 0.0)
    dual_obj = float(y @ rhs) if program.constraints else 0.0
    scale = 1.0 + float(np.abs(c).max(initial=0.0)) + float(np.abs(y).max(initial=0.0))
    for j, var in enumerate(program.variables):
        rcj = sign * rc[j]
        lo = -INF if var.lower is None else var.lower
        hi = INF if var.upper is None else var.upper
        if rcj > tol * scale:
            if lo == -INF:
                raise AssertionError(f"dual infeasible at variable {var.name}")
            dual_obj += rc[j] * lo
        elif rcj < -tol * scale:
            if hi == INF:
                raise AssertionError(f"dual infeasible at variable {var.name}")
            dual_obj += rc[j] * hi
    dual_obj += program.objective_constant
    gap = abs(primal - dual_obj) / (1.0 + abs(primal))
    if gap > tol:
        raise AssertionError(f"duality gap {gap}")
    return {"primal": primal, "dual": dual_obj, "gap": gap, "worst_violation": worst}
