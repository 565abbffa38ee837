"""Mini unit-commitment under scalar wind-forecast-error uncertainty.

First stage commits units (on/start/stop binaries), schedules generation,
reserves and a piecewise-linear generation cost; an affine recourse policy
splits the realized forecast error across units through participation
factors summing to one per period, and the adjustment bill is the absolute
error weighted by per-unit adjustment prices. That two-piece loss slots
straight into the robust counterpart builders.

Minimum up/down sums are clipped at the horizon (the run-length coefficient
shrinks with the remaining window); units are assumed to have settled their
minimum times before the first period.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleInstance
from .program import EQ, GE, LE
from .reformulate import DecisionModel, PiecewiseAffineLoss, Polytope
from .solver import INFEASIBLE, OPTIMAL, SolverConfig, SolveResult, solve_lp, solve_milp


@dataclass(frozen=True)
class UcUnit:
    """One thermal unit: costs, limits, ramps, minimum times, initial state."""

    startup_cost: float
    shutdown_cost: float
    reserve_up_cost: float
    reserve_down_cost: float
    adjust_cost: float
    p_min: float
    p_max: float
    ramp_up: float
    ramp_down: float
    startup_ramp: float
    shutdown_ramp: float
    min_up: int
    min_down: int
    cost_breakpoints: tuple  # ((power, cost), ...) convex increasing
    initial_on: int = 0
    initial_power: float = 0.0

    def __post_init__(self):
        if self.p_min > self.p_max:
            raise ValueError("p_min exceeds p_max")
        if self.min_up < 1 or self.min_down < 1:
            raise ValueError("minimum up/down times must be >= 1")
        pts = tuple((float(p), float(c)) for p, c in self.cost_breakpoints)
        if len(pts) < 2:
            raise ValueError("need at least two cost breakpoints")
        slopes = []
        for (p0, c0), (p1, c1) in zip(pts, pts[1:]):
            if p1 <= p0:
                raise ValueError("cost breakpoints must have increasing power")
            slopes.append((c1 - c0) / (p1 - p0))
        if any(s1 < s0 - 1e-9 for s0, s1 in zip(slopes, slopes[1:])):
            raise ValueError("generation cost must be convex")
        object.__setattr__(self, "cost_breakpoints", pts)

    def segments(self):
        """Epigraph rows (slope, intercept) for the piecewise cost."""
        out = []
        for (p0, c0), (p1, c1) in zip(self.cost_breakpoints, self.cost_breakpoints[1:]):
            slope = (c1 - c0) / (p1 - p0)
            out.append((slope, c0 - slope * p0))
        return out


@dataclass(frozen=True)
class UcInstance:
    units: tuple
    horizon: int
    load: tuple
    wind: tuple
    error_lower: float
    error_upper: float

    def __post_init__(self):
        if self.horizon < 1:
            raise ValueError("horizon must be >= 1")
        if len(self.load) != self.horizon or len(self.wind) != self.horizon:
            raise ValueError("load and wind series must match the horizon")
        if any(p < 0 for p in self.load):
            raise ValueError("load must be nonnegative")
        if self.error_lower > self.error_upper:
            raise ValueError("empty uncertainty support")
        object.__setattr__(self, "load", tuple(float(v) for v in self.load))
        object.__setattr__(self, "wind", tuple(float(v) for v in self.wind))

    @property
    def n_units(self) -> int:
        return len(self.units)

    def support(self) -> Polytope:
        return Polytope.interval(self.error_lower, self.error_upper)


@dataclass(frozen=True)
class UcModel:
    """Decision model plus the index map needed to audit solutions."""

    decision: DecisionModel
    loss: PiecewiseAffineLoss
    index: dict  # role -> {(i, t): variable index}


def _structural_checks(instance: UcInstance):
    for t in range(instance.horizon):
        cap = sum(u.p_max for u in instance.units) + instance.wind[t]
        if instance.load[t] > cap + 1e-9:
            raise InfeasibleInstance(
                f"load {instance.load[t]} exceeds total capacity {cap} in period {t + 1}"
            )


def build_uc_model(instance: UcInstance) -> UcModel:
    """Assemble the first-stage decision block and the two-piece recourse loss."""
    _structural_checks(instance)
    G, T = instance.n_units, instance.horizon
    roles = ("on", "up", "dn", "p", "rU", "rD", "af", "fc")
    index: dict = {r: {} for r in roles}
    names = []
    cost = []
    lower = []
    upper = []
    binaries = set()

    def add(role, i, t, lo, hi, obj, binary=False):
        j = len(names)
        names.append(f"{role}[{i}][{t}]")
        cost.append(obj)
        lower.append(lo)
        upper.append(hi)
        if binary:
            binaries.add(j)
        index[role][(i, t)] = j
        return j

    for i, unit in enumerate(instance.units):
        for t in range(T):
            add("on", i, t, 0.0, 1.0, 0.0, binary=True)
            add("up", i, t, 0.0, 1.0, unit.startup_cost, binary=True)
            add("dn", i, t, 0.0, 1.0, unit.shutdown_cost, binary=True)
            add("p", i, t, 0.0, None, 0.0)
            add("rU", i, t, 0.0, None, unit.reserve_up_cost)
            add("rD", i, t, 0.0, None, unit.reserve_down_cost)
            add("af", i, t, 0.0, 1.0, 0.0)
            add("fc", i, t, None, None, 1.0)

    cons = []

    def row(coeffs, rel, rhs, name):
        cons.append((tuple(coeffs), rel, rhs, name))

    for i, unit in enumerate(instance.units):
        for t in range(T):
            on = index["on"][(i, t)]
            prev_on = index["on"][(i, t - 1)] if t > 0 else None
            s_prev_const = float(unit.initial_on) if t == 0 else 0.0

            # State transition: on_t - on_{t-1} = up_t - dn_t.
            coeffs = [(on, 1.0), (index["up"][(i, t)], -1.0), (index["dn"][(i, t)], 1.0)]
            if prev_on is not None:
                coeffs.append((prev_on, -1.0))
            row(coeffs, EQ, s_prev_const, f"state[{i}][{t}]")

            # Minimum up: L*(on_t - on_{t-1}) <= sum of the next L on's.
            L = min(unit.min_up, T - t)
            coeffs = [(on, -float(L))]
            if prev_on is not None:
                coeffs.append((prev_on, float(L)))
            for k in range(L):
                coeffs.append((index["on"][(i, t + k)], 1.0))
            row(coeffs, GE, -float(L) * s_prev_const, f"minup[{i}][{t}]")

            # Minimum down: L*(on_{t-1} - on_t) <= sum of the next L (1 - on),
            # i.e. L*on_{t-1} - L*on_t + sum_k on_{t+k} <= L.
            L = min(unit.min_down, T - t)
            coeffs = [(on, -float(L))]
            if prev_on is not None:
                coeffs.append((prev_on, float(L)))
            for k in range(L):
                coeffs.append((index["on"][(i, t + k)], 1.0))
            rhs_dn = float(L) * (1.0 - s_prev_const) if t == 0 else float(L)
            row(coeffs, LE, rhs_dn, f"mindn[{i}][{t}]")

            # Capacity with reserves carved out.
            p = index["p"][(i, t)]
            row(
                [(p, 1.0), (on, -unit.p_min), (index["rD"][(i, t)], -1.0)],
                GE,
                0.0,
                f"caplo[{i}][{t}]",
            )
            row(
                [(p, 1.0), (on, unit.p_max * -1.0), (index["rU"][(i, t)], 1.0)],
                LE,
                0.0,
                f"caphi[{i}][{t}]",
            )

            # Ramping with commitment-dependent limits.
            rhs_c = 2.0 * unit.startup_ramp + unit.ramp_up
            coeffs = [
                (p, 1.0),
                (index["rU"][(i, t)], 1.0),
                (on, unit.startup_ramp + unit.ramp_up),
            ]
            if t > 0:
                coeffs += [
                    (index["p"][(i, t - 1)], -1.0),
                    (index["rD"][(i, t - 1)], 1.0),
                    (prev_on, unit.startup_ramp - unit.ramp_up),
                ]
                row(coeffs, LE, rhs_c, f"rampup[{i}][{t}]")
            else:
                row(
                    coeffs,
                    LE,
                    rhs_c
                    + unit.initial_power
                    - (unit.startup_ramp - unit.ramp_up) * s_prev_const,
                    f"rampup[{i}][{t}]",
                )

            rhs_c = 2.0 * unit.shutdown_ramp + unit.ramp_down
            coeffs = [
                (p, -1.0),
                (index["rD"][(i, t)], 1.0),
                (on, unit.shutdown_ramp - unit.ramp_down),
            ]
            if t > 0:
                coeffs += [
                    (index["p"][(i, t - 1)], 1.0),
                    (index["rU"][(i, t - 1)], 1.0),
                    (prev_on, unit.shutdown_ramp + unit.ramp_down),
                ]
                row(coeffs, LE, rhs_c, f"rampdn[{i}][{t}]")
            else:
                row(
                    coeffs,
                    LE,
                    rhs_c
                    - unit.initial_power
                    - (unit.shutdown_ramp + unit.ramp_down) * s_prev_const,
                    f"rampdn[{i}][{t}]",
                )

            # Reserve coverage of the affine share of the error range.
            af = index["af"][(i, t)]
            row(
                [(index["rD"][(i, t)], 1.0), (af, -instance.error_upper)],
                GE,
                0.0,
                f"covdn[{i}][{t}]",
            )
            row(
                [(index["rU"][(i, t)], 1.0), (af, instance.error_lower)],
                GE,
                0.0,
                f"covup[{i}][{t}]",
            )

            # Piecewise generation cost epigraph.
            for s, (slope, intercept) in enumerate(unit.segments()):
                row(
                    [(index["fc"][(i, t)], 1.0), (p, -slope), (on, -intercept)],
                    GE,
                    0.0,
                    f"fcseg[{i}][{t}][{s}]",
                )

    for t in range(T):
        row(
            [(index["p"][(i, t)], 1.0) for i in range(G)],
            EQ,
            instance.load[t] - instance.wind[t],
            f"balance[{t}]",
        )
        row(
            [(index["af"][(i, t)], 1.0) for i in range(G)],
            EQ,
            1.0,
            f"afsum[{t}]",
        )

    decision = DecisionModel(
        n=len(names),
        cost=np.array(cost),
        constraints=tuple(cons),
        binaries=frozenset(binaries),
        lower=tuple(lower),
        upper=tuple(upper),
        names=tuple(names),
    )
    # Adjustment loss: max(S(af) w, -S(af) w) with S = sum_it d_i af_it.
    arow = np.zeros((1, len(names)))
    for i, unit in enumerate(instance.units):
        for t in range(T):
            arow[0, index["af"][(i, t)]] = unit.adjust_cost
    loss = PiecewiseAffineLoss(
        pieces=(
            (arow, np.zeros(1), np.zeros(len(names)), 0.0),
            (-arow, np.zeros(1), np.zeros(len(names)), 0.0),
        )
    )
    return UcModel(decision=decision, loss=loss, index=index)


def deterministic_uc(instance: UcInstance, config: SolverConfig | None = None) -> SolveResult:
    """First-stage MILP alone (no uncertainty term)."""
    from .program import ProgramBuilder

    model = build_uc_model(instance)
    builder = ProgramBuilder(name="uc-deterministic", sense="min")
    d = model.decision
    for j in range(d.n):
        lo, hi = d.bound(j)
        builder.add_variable(d.name(j), lower=lo, upper=hi, binary=j in d.binaries, objective=float(d.cost[j]))
    for coeffs, rel, rhs, name in d.constraints:
        builder.add_constraint(list(coeffs), rel, rhs, name=name)
    builder.metadata = {"role_x": [d.name(j) for j in range(d.n)]}
    return solve_milp(builder.build(), config or SolverConfig())


def audit_uc_solution(instance: UcInstance, model: UcModel, assignment: dict, tol: float = 1e-6) -> None:
    """Solver-independent feasibility audit of the recourse-policy block."""
    G, T = instance.n_units, instance.horizon
    for t in range(T):
        total = sum(assignment[f"af[{i}][{t}]"] for i in range(G))
        if abs(total - 1.0) > tol:
            raise AssertionError(f"participation factors sum to {total} in period {t}")
        for i in range(G):
            af = assignment[f"af[{i}][{t}]"]
            if af < -tol or af > 1.0 + tol:
                raise AssertionError(f"af[{i}][{t}] = {af} outside [0, 1]")
            r_dn = assignment[f"rD[{i}][{t}]"]
            r_up = assignment[f"rU[{i}][{t}]"]
            if af * instance.error_upper > r_dn + tol:
                raise AssertionError(f"downward reserve too small at unit {i}, period {t}")
            if -af * instance.error_lower > r_up + tol:
                raise AssertionError(f"upward reserve too small at unit {i}, period {t}")


def enumerate_commitments(
    program, model: UcModel, instance: UcInstance, config: SolverConfig | None = None
):
    """Exhaustive oracle: fix every on/off pattern, relax start/stop flags to
    their LP box (integral at optimum under positive switching costs), solve
    the LP, and take the best value. Returns (value, pattern) or (None, None)
    if every pattern is infeasible.
    """
    config = config or SolverConfig()
    G, T = instance.n_units, instance.horizon
    name_to_pos = {v.name: j for j, v in enumerate(program.variables)}
    on_positions = {
        (i, t): name_to_pos[f"on[{i}][{t}]"] for i in range(G) for t in range(T)
    }
    relax = {
        name_to_pos[f"{role}[{i}][{t}]"]: (0.0, 1.0)
        for role in ("up", "dn")
        for i in range(G)
        for t in range(T)
        if f"{role}[{i}][{t}]" in name_to_pos
    }
    best_val, best_pattern = None, None
    for bits in itertools.product((0.0, 1.0), repeat=G * T):
        overrides = dict(relax)
        pattern = {}
        for idx, (key, pos) in enumerate(sorted(on_positions.items())):
            overrides[pos] = (bits[idx], bits[idx])
            pattern[key] = bits[idx]
        result = solve_lp(program, config, bound_overrides=overrides)
        if result.status == INFEASIBLE:
            continue
        if result.status != OPTIMAL:
            raise RuntimeError(f"pattern LP ended with {result.status}")
        if best_val is None or result.objective < best_val - 1e-12:
            best_val, best_pattern = result.objective, pattern
    return best_val, best_pattern
