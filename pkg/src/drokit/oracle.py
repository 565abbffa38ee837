"""Independent verification paths: discretized worst-case expectations,
Monte Carlo out-of-sample evaluation, certificate-coverage experiments, and
containment checks between the cluster set and its squeezing global balls.

The worst-case oracle never touches the dual reformulation: it maximizes the
expected loss directly over distributions supported on a finite grid, one
conditional distribution per data atom with per-cluster transport budgets,
so it can cross-examine the dual LP values at a known discretization error.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .ambiguity import BnwdroSet, MdroSet, WdroSet, as_balls, sandwich_radii
from .dataset import MixtureSpec, sample_mixture
from .errors import (
    EmptyGrid,
    SandwichViolation,
    UnboundedSupport,
    UnsupportedMdroDimension,
)
from .program import EQ, GE, LE, ProgramBuilder
from .reformulate import (
    PiecewiseAffineLoss,
    Polytope,
    fixed_decision_program,
    worst_case_status,
)
from .solver import OPTIMAL, SolverConfig, solve_lp


@dataclass(frozen=True)
class SupportGrid:
    """Finite node set inside a polytope at lattice resolution ``resolution``."""

    nodes: np.ndarray
    resolution: float

    def __post_init__(self):
        nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "nodes", nodes)

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]


def discretize_support(
    support: Polytope, resolution: float, extra_points=None
) -> SupportGrid:
    """Axis-aligned lattice over the bounding box, filtered by C w <= d.

    Points passed in ``extra_points`` (typically the data atoms) that lie in
    the support are appended as additional nodes, so a zero-radius oracle
    reproduces the sample average exactly. Duplicate nodes are dropped.
    """
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    if not support.bounded:
        raise UnboundedSupport("discretization requires a bounded support")
    lo, hi = support.box_lower, support.box_upper
    axes = []
    for j in range(support.m):
        count = int(math.floor((hi[j] - lo[j]) / resolution + 1e-9)) + 1
        axes.append(lo[j] + resolution * np.arange(count))
    mesh = np.meshgrid(*axes, indexing="ij")
    lattice = np.column_stack([g.ravel() for g in mesh])
    feasible = np.all(lattice @ support.C.T <= support.d + 1e-9, axis=1)
    nodes = lattice[feasible]
    if extra_points is not None:
        extras = np.atleast_2d(np.asarray(extra_points, dtype=float))
        inside = np.all(extras @ support.C.T <= support.d + 1e-9, axis=1)
        nodes = np.vstack([nodes, extras[inside]]) if np.any(inside) else nodes
    if nodes.shape[0] == 0:
        raise EmptyGrid(
            f"resolution {resolution} produced no nodes inside the support"
        )
    _, keep = np.unique(nodes, axis=0, return_index=True)
    nodes = nodes[np.sort(keep)]
    return SupportGrid(nodes=nodes, resolution=resolution)


def _piece_values(loss_at_x, nodes: np.ndarray) -> np.ndarray:
    """max-piece loss value at every node."""
    vals = np.full(nodes.shape[0], -np.inf)
    for a, b in loss_at_x:
        vals = np.maximum(vals, nodes @ np.atleast_1d(np.asarray(a, dtype=float)) + b)
    return vals


def _ground_distance(points: np.ndarray, nodes: np.ndarray, norm: str) -> np.ndarray:
    diff = np.abs(points[:, None, :] - nodes[None, :, :])
    if norm == "l1":
        return diff.sum(axis=2)
    if norm == "linf":
        return diff.max(axis=2)
    raise ValueError(f"unknown ground norm {norm!r}")


def worst_case_oracle(
    ambiguity,
    loss_at_x,
    grid: SupportGrid,
    norm: str = "l1",
    config: SolverConfig | None = None,
) -> float:
    """Brute-force worst-case expected loss over the discretized support.

    Wasserstein variants solve a transport LP: mass q[atom, node] >= 0 moves
    each atom's conditional distribution onto the grid under per-cluster
    budget rows. The moment variant solves an LP over node probabilities with
    a +-resolution band on the mean and per-coordinate second-moment caps
    (scalar or diagonal only).
    """
    config = config or SolverConfig()
    g = _piece_values(loss_at_x, grid.nodes)
    if isinstance(ambiguity, MdroSet):
        return _mdro_oracle(ambiguity, g, grid, config)

    balls = as_balls(ambiguity)
    builder = ProgramBuilder(name="transport-oracle", sense="max")
    n_nodes = grid.n_nodes
    q_idx = []
    dist_rows = []
    for k, ball in enumerate(balls):
        dist = _ground_distance(ball.center.points, grid.nodes, norm)
        n_k = ball.center.n_atoms
        for a in range(n_k):
            cols = [
                builder.add_variable(
                    f"q[{k}][{a}][{j}]",
                    lower=0.0,
                    objective=float(ball.weight) / n_k * g[j],
                )
                for j in range(n_nodes)
            ]
            builder.add_constraint([(c, 1.0) for c in cols], EQ, 1.0, name=f"mass[{k}][{a}]")
            q_idx.append(cols)
            dist_rows.append((k, a, dist[a]))
    offset = 0
    for k, ball in enumerate(balls):
        n_k = ball.center.n_atoms
        coeffs = []
        for a in range(n_k):
            _, _, dist = dist_rows[offset + a]
            cols = q_idx[offset + a]
            coeffs.extend((cols[j], dist[j] / n_k) for j in range(n_nodes) if dist[j] != 0.0)
        builder.add_constraint(coeffs, LE, ball.radius, name=f"budget[{k}]")
        offset += n_k
    result = solve_lp(builder.build(), config)
    if result.status != OPTIMAL:
        raise RuntimeError(f"transport oracle LP ended with {result.status}")
    return result.objective


def _mdro_oracle(ambiguity: MdroSet, g: np.ndarray, grid: SupportGrid, config: SolverConfig) -> float:
    m = ambiguity.mu_hat.shape[0]
    if m > 1:
        off = ambiguity.sigma_hat - np.diag(np.diag(ambiguity.sigma_hat))
        scale = max(1.0, float(np.abs(ambiguity.sigma_hat).max()))
        if np.abs(off).max() > 1e-12 * scale:
            raise UnsupportedMdroDimension(
                "full covariance coupling requires semidefinite machinery; "
                "only scalar/diagonal moment sets are supported"
            )
    builder = ProgramBuilder(name="moment-oracle", sense="max")
    cols = [
        builder.add_variable(f"p[{j}]", lower=0.0, objective=float(g[j]))
        for j in range(grid.n_nodes)
    ]
    builder.add_constraint([(c, 1.0) for c in cols], EQ, 1.0, name="mass")
    band = grid.resolution
    for c_ix in range(m):
        wc = grid.nodes[:, c_ix]
        builder.add_constraint(
            [(cols[j], wc[j]) for j in range(grid.n_nodes)],
            LE,
            float(ambiguity.mu_hat[c_ix]) + band,
            name=f"meanU[{c_ix}]",
        )
        builder.add_constraint(
            [(cols[j], wc[j]) for j in range(grid.n_nodes)],
            GE,
            float(ambiguity.mu_hat[c_ix]) - band,
            name=f"meanL[{c_ix}]",
        )
        dev2 = (wc - ambiguity.mu_hat[c_ix]) ** 2
        builder.add_constraint(
            [(cols[j], dev2[j]) for j in range(grid.n_nodes) if dev2[j] != 0.0],
            LE,
            float(ambiguity.sigma_hat[c_ix, c_ix]),
            name=f"moment[{c_ix}]",
        )
    result = solve_lp(builder.build(), config)
    if result.status != OPTIMAL:
        raise RuntimeError(f"moment oracle LP ended with {result.status}")
    return result.objective


def monte_carlo_cost(
    x, loss: PiecewiseAffineLoss, sampler: MixtureSpec, n: int, seed: int
) -> tuple:
    """(mean, standard error) of the max-piece loss over n i.i.d. draws."""
    draws = sample_mixture(sampler, n, seed).points
    pieces = loss.at_decision(x)
    vals = _piece_values(pieces, draws)
    mean = float(np.mean(vals))
    stderr = float(np.std(vals, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return mean, stderr


@dataclass(frozen=True)
class ReliabilityReport:
    """Coverage of the certificate over repeated dataset draws."""

    trials: int
    coverage: float
    rows: tuple  # per-trial dicts

    def to_json(self) -> str:
        return json.dumps(
            {"trials": self.trials, "coverage": self.coverage, "rows": list(self.rows)},
            sort_keys=True,
        )

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["trial", "certificate", "true_cost", "covered", "error"]
            )
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row.get(k, "") for k in writer.fieldnames})


def reliability_experiment(
    *,
    trials: int,
    n_points: int,
    sampler: MixtureSpec,
    method: str,
    method_config,
    eval_samples: int = 10_000,
    seed: int = 0,
) -> ReliabilityReport:
    """Draw ``trials`` datasets, run the tagged decision pipeline on each,
    and record whether the certificate upper-bounds the Monte Carlo cost.

    Per-trial seeds are seed + trial index; evaluation draws use an offset
    stream so they are independent of the training data. Trial failures are
    recorded as uncovered rows, not raised.
    """
    from . import pipeline  # deferred: pipeline builds on this module

    if trials < 1:
        raise ValueError("need at least one trial")
    rows = []
    covered_count = 0
    for t in range(trials):
        trial_seed = seed + t
        try:
            data = sample_mixture(sampler, n_points, trial_seed)
            sol = pipeline.solve_method(method, data, method_config)
            true_cost, _ = monte_carlo_cost(
                sol.decision, method_config.loss, sampler, eval_samples, seed=10_000_019 + trial_seed
            )
            true_cost += sol.first_stage_cost
            covered = bool(true_cost <= sol.certificate + 1e-12)
            covered_count += covered
            rows.append(
                {
                    "trial": t,
                    "certificate": sol.certificate,
                    "true_cost": true_cost,
                    "covered": covered,
                }
            )
        except Exception as exc:  # noqa: BLE001 - per-trial failures are data
            rows.append({"trial": t, "covered": False, "error": f"{type(exc).__name__}: {exc}"})
    return ReliabilityReport(
        trials=trials, coverage=covered_count / trials, rows=tuple(rows)
    )


@dataclass(frozen=True)
class SandwichReport:
    rows: tuple  # per-loss dicts with v_low, v_mid, v_high

    def to_json(self) -> str:
        return json.dumps({"rows": list(self.rows)}, sort_keys=True)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.DictWriter(
                fh, fieldnames=["loss", "v_low", "v_mid", "v_high", "v_oracle"]
            )
            writer.writeheader()
            for row in self.rows:
                writer.writerow({k: row.get(k, "") for k in writer.fieldnames})


def sandwich_check(
    ambiguity: BnwdroSet,
    losses,
    support: Polytope,
    norm: str = "l1",
    config: SolverConfig | None = None,
    oracle_resolution: float | None = None,
    tol: float = 1e-7,
) -> SandwichReport:
    """Verify value(global ball at theta_lower) <= value(cluster set) <=
    value(global ball at theta_upper) for every fixed-decision loss.

    ``losses`` is a list of instantiated piece lists. When
    ``oracle_resolution`` is given, the grid oracle value of the cluster set
    is reported alongside. Violations raise SandwichViolation listing the
    offending losses.
    """
    config = config or SolverConfig()
    radii = sandwich_radii(ambiguity)
    pooled_points = np.vstack([b.center.points for b in ambiguity.balls])
    n = pooled_points.shape[0]
    from .dataset import DiscreteDistribution

    pooled = DiscreteDistribution(points=pooled_points, weights=np.full(n, 1.0 / n))
    low_set = WdroSet(center=pooled, radius=radii.theta_lower)
    high_set = WdroSet(center=pooled, radius=radii.theta_upper)

    grid = None
    if oracle_resolution is not None:
        grid = discretize_support(support, oracle_resolution, extra_points=pooled_points)

    rows = []
    violations = []
    for ix, loss_at_x in enumerate(losses):
        values = {}
        for key, amb in (("v_low", low_set), ("v_mid", ambiguity), ("v_high", high_set)):
            prog = fixed_decision_program(amb, loss_at_x, support, norm)
            res = solve_lp(prog, config)
            if res.status != OPTIMAL:
                raise RuntimeError(
                    f"sandwich dual LP for {key} ended with {worst_case_status(res)}"
                )
            values[key] = res.objective
        row = {"loss": ix, **values}
        if grid is not None:
            row["v_oracle"] = worst_case_oracle(ambiguity, loss_at_x, grid, norm, config)
        rows.append(row)
        if not (
            values["v_low"] <= values["v_mid"] + tol
            and values["v_mid"] <= values["v_high"] + tol
        ):
            violations.append(row)
    if violations:
        raise SandwichViolation(violations)
    return SandwichReport(rows=tuple(rows))
