"""End-to-end decision pipelines for the compared methods.

Each tag maps a dataset to (decision, certificate): the cluster-ball method
fits the mixture model, partitions the data, calibrates per-cluster radii and
solves the dual program; the global-ball method skips clustering; the sample
average method is the zero-radius ball; the moment method solves a
grid-discretized dual of the moment-set worst case, consistent with the
moment oracle's mean band.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ambiguity as amb
from . import dpmm
from .dataset import Dataset, empirical
from .errors import UnsupportedMdroDimension
from .oracle import SupportGrid, discretize_support
from .program import GE, ProgramBuilder, ProgramDescription
from .reformulate import DecisionModel, PiecewiseAffineLoss, Polytope, dual_program
from .solver import OPTIMAL, SolverConfig, solve_lp, solve_milp

METHODS = ("bnwdro", "wdro", "mdro", "saa")


@dataclass(frozen=True)
class MethodConfig:
    """Everything a pipeline needs besides the dataset."""

    loss: PiecewiseAffineLoss
    support: Polytope
    decision: DecisionModel
    beta: float = 0.95
    norm: str = "l1"
    dpmm: dpmm.DpmmConfig = field(default_factory=dpmm.DpmmConfig)
    solver: SolverConfig = field(default_factory=SolverConfig)
    mdro_resolution: float | None = None
    theta_override: float | None = None


@dataclass(frozen=True)
class MethodSolution:
    method: str
    decision: np.ndarray
    certificate: float
    first_stage_cost: float
    clusters: int
    result: object


def _clip_to_support(data: Dataset, support: Polytope) -> Dataset:
    """Guard against sampler tail points leaving a bounded box support."""
    if not support.bounded:
        return data
    clipped = np.clip(data.points, support.box_lower, support.box_upper)
    if np.array_equal(clipped, data.points):
        return data
    return Dataset(points=clipped, source=data.source + "+clipped")


def _with_radius(ambiguity_set, radius: float):
    if isinstance(ambiguity_set, amb.WdroSet):
        return amb.WdroSet(center=ambiguity_set.center, radius=radius)
    return amb.BnwdroSet(
        balls=tuple(
            amb.LocalBall(center=b.center, radius=radius, weight=b.weight)
            for b in ambiguity_set.balls
        )
    )


def mdro_decision_program(
    moment_set: amb.MdroSet,
    loss: PiecewiseAffineLoss,
    decision: DecisionModel,
    grid: SupportGrid,
) -> ProgramDescription:
    """LP/MILP dual of the grid-restricted moment worst case.

    Multipliers: y0 for total mass, yU/yL for the +-resolution mean band,
    y2 >= 0 per coordinate for the diagonal second-moment caps. Scalar or
    diagonal moment sets only.
    """
    mu = moment_set.mu_hat
    sig = moment_set.sigma_hat
    m = mu.shape[0]
    if m > 1:
        off = sig - np.diag(np.diag(sig))
        if np.abs(off).max() > 1e-12 * max(1.0, float(np.abs(sig).max())):
            raise UnsupportedMdroDimension(
                "full covariance coupling requires semidefinite machinery"
            )
    band = grid.resolution
    builder = ProgramBuilder(name="mdro-dual", sense="min")
    builder.add_objective_constant(decision.constant)
    x_idx = []
    for j in range(decision.n):
        lo, hi = decision.bound(j)
        x_idx.append(
            builder.add_variable(
                decision.name(j),
                lower=lo,
                upper=hi,
                binary=j in decision.binaries,
                objective=float(decision.cost[j]),
            )
        )
    y0 = builder.add_variable("y0", objective=1.0)
    yU = [
        builder.add_variable(f"yU[{c}]", lower=0.0, objective=float(mu[c]) + band)
        for c in range(m)
    ]
    yL = [
        builder.add_variable(f"yL[{c}]", lower=0.0, objective=-(float(mu[c]) - band))
        for c in range(m)
    ]
    y2 = [
        builder.add_variable(f"y2[{c}]", lower=0.0, objective=float(sig[c, c]))
        for c in range(m)
    ]
    for j in range(grid.n_nodes):
        w = grid.nodes[j]
        dev2 = (w - mu) ** 2
        for i, (A_i, c_i, q_i, r_i) in enumerate(loss.pieces):
            xcoef = A_i.T @ w + q_i
            row = [(y0, 1.0)]
            row += [(yU[c], float(w[c])) for c in range(m) if w[c] != 0.0]
            row += [(yL[c], -float(w[c])) for c in range(m) if w[c] != 0.0]
            row += [(y2[c], float(dev2[c])) for c in range(m) if dev2[c] != 0.0]
            row += [(x_idx[t], -xcoef[t]) for t in range(decision.n) if xcoef[t] != 0.0]
            builder.add_constraint(row, GE, float(c_i @ w) + r_i, name=f"nd[{j}][{i}]")
    for coeffs, rel, rhs, cname in decision.constraints:
        builder.add_constraint([(x_idx[t], v) for t, v in coeffs], rel, rhs, name=cname)
    builder.metadata = {"role_x": [builder.name_at(j) for j in x_idx]}
    return builder.build()


def default_mdro_grid(config: MethodConfig) -> SupportGrid:
    extent = float(np.max(config.support.box_upper - config.support.box_lower))
    resolution = config.mdro_resolution or max(extent / 400.0, 1e-9)
    return discretize_support(config.support, resolution)


def _solve_program(program: ProgramDescription, config: SolverConfig):
    result = solve_milp(program, config) if program.has_binaries else solve_lp(program, config)
    if result.status != OPTIMAL:
        raise RuntimeError(f"pipeline solve ended with status {result.status}")
    return result


def build_ambiguity(method: str, data: Dataset, config: MethodConfig):
    """Ambiguity set(s) for a tag; returns (set, n_clusters)."""
    if method == "bnwdro":
        posterior = dpmm.fit(data, config.dpmm)
        clustering = dpmm.partition(data, dpmm.hard_labels(posterior))
        built = amb.build_bnwdro(data, clustering, config.beta)
        k = clustering.k
    elif method == "wdro":
        built = amb.build_wdro(data, config.beta)
        k = 1
    elif method == "saa":
        built = amb.WdroSet(center=empirical(data), radius=0.0)
        k = 1
    elif method == "mdro":
        return amb.build_mdro(data), 0
    else:
        raise ValueError(f"unknown method tag {method!r}; choose from {METHODS}")
    if config.theta_override is not None and method != "saa":
        built = _with_radius(built, config.theta_override)
    return built, k


def solve_method(method: str, data: Dataset, config: MethodConfig) -> MethodSolution:
    """Run one tagged pipeline on one dataset."""
    data = _clip_to_support(data, config.support)
    ambiguity_set, k = build_ambiguity(method, data, config)
    if method == "mdro":
        program = mdro_decision_program(
            ambiguity_set, config.loss, config.decision, default_mdro_grid(config)
        )
    else:
        program = dual_program(
            ambiguity_set, config.loss, config.support, config.decision, config.norm
        )
    result = _solve_program(program, config.solver)
    x = np.array([result.assignment[n] for n in program.metadata["role_x"]])
    first_stage = float(config.decision.cost @ x) + config.decision.constant
    return MethodSolution(
        method=method,
        decision=x,
        certificate=result.objective,
        first_stage_cost=first_stage,
        clusters=k,
        result=result,
    )
