"""Finite LP/MILP reformulations of worst-case expectations over Wasserstein
ambiguity sets with convex piecewise-affine losses and polyhedral supports.

For a loss g(x, w) = max_i <a_i(x), w> + b_i(x) with a_i(x) = A_i x + c_i and
b_i(x) = <q_i, x> + r_i, support {w : C w <= d}, and a weighted family of
local balls (ball k: atoms w_hat in cluster k, radius theta_k, weight n_k/N),
the robust counterpart minimizes

    f(x) + sum_k weight_k * [ lambda_k theta_k + (1/n_k) sum_{w_hat in k} alpha_w ]

subject to, for every atom w_hat (in cluster k) and piece i,

    alpha_w >= <a_i(x), w_hat> + <psi_{w,i}, d - C w_hat> + b_i(x)
    || C^T psi_{w,i} - a_i(x) ||_* <= lambda_k,   psi_{w,i} >= 0

with the dual-norm row linearized for the chosen ground norm (l1 ground gives
2m sign rows; linf ground introduces m auxiliary absolute-value variables per
atom-piece pair). Variable order is canonical (x block, lambda by ball,
alpha by data row, psi by (row, piece), then any auxiliaries), so identical
instances build byte-identical programs.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .ambiguity import BnwdroSet, WdroSet, as_balls
from .errors import EmptySupport
from .program import EQ, GE, LE, ProgramBuilder, ProgramDescription
from .solver import INFEASIBLE, OPTIMAL, UNBOUNDED, SolverConfig, solve_lp

_NORMS = ("l1", "linf")


@dataclass(frozen=True)
class Polytope:
    """Support set {w : C w <= d}; nonemptiness is certified at construction
    and a per-coordinate bounding box plus boundedness flag are stored."""

    C: np.ndarray
    d: np.ndarray
    bounded: bool = field(init=False)
    box_lower: np.ndarray = field(init=False)
    box_upper: np.ndarray = field(init=False)

    def __post_init__(self):
        C = np.atleast_2d(np.asarray(self.C, dtype=float))
        d = np.atleast_1d(np.asarray(self.d, dtype=float))
        if C.shape[0] != d.shape[0]:
            raise ValueError("C and d row counts differ")
        if not (np.all(np.isfinite(C)) and np.all(np.isfinite(d))):
            raise ValueError("support data must be finite")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "d", d)
        lo, hi = self._bounding_box()
        object.__setattr__(self, "box_lower", lo)
        object.__setattr__(self, "box_upper", hi)
        object.__setattr__(self, "bounded", bool(np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))))

    @property
    def m(self) -> int:
        return self.C.shape[1]

    @property
    def n_rows(self) -> int:
        return self.C.shape[0]

    def _bounding_box(self):
        cfg = SolverConfig()
        lo = np.empty(self.m)
        hi = np.empty(self.m)
        for j in range(self.m):
            for sense, out in (("min", lo), ("max", hi)):
                builder = ProgramBuilder(name="support-box", sense=sense)
                for t in range(self.m):
                    builder.add_variable(f"w[{t}]", objective=1.0 if t == j else 0.0)
                for r in range(self.n_rows):
                    coeffs = [(t, self.C[r, t]) for t in range(self.m) if self.C[r, t] != 0.0]
                    builder.add_constraint(coeffs, LE, self.d[r], name=f"S{r}")
                result = solve_lp(builder.build(), cfg)
                if result.status == INFEASIBLE:
                    raise EmptySupport("support polytope has no feasible point")
                if result.status == UNBOUNDED:
                    out[j] = -np.inf if sense == "min" else np.inf
                elif result.status == OPTIMAL:
                    out[j] = result.objective
                else:
                    raise RuntimeError(f"support box LP ended with {result.status}")
        return lo, hi

    def contains(self, w, tol: float = 1e-9) -> bool:
        return bool(np.all(self.C @ np.asarray(w, dtype=float) <= self.d + tol))

    @staticmethod
    def box(lower, upper) -> "Polytope":
        lower = np.atleast_1d(np.asarray(lower, dtype=float))
        upper = np.atleast_1d(np.asarray(upper, dtype=float))
        m = lower.shape[0]
        return Polytope(C=np.vstack([np.eye(m), -np.eye(m)]), d=np.concatenate([upper, -lower]))

    @staticmethod
    def interval(lower: float, upper: float) -> "Polytope":
        return Polytope.box([lower], [upper])


@dataclass(frozen=True)
class PiecewiseAffineLoss:
    """g(x, w) = max_i <A_i x + c_i, w> + <q_i, x> + r_i."""

    pieces: tuple  # ((A_i, c_i, q_i, r_i), ...)

    def __post_init__(self):
        if not self.pieces:
            raise ValueError("loss needs at least one piece")
        norm = []
        m, n = None, None
        for A, c, q, r in self.pieces:
            A = np.atleast_2d(np.asarray(A, dtype=float))
            c = np.atleast_1d(np.asarray(c, dtype=float))
            q = np.atleast_1d(np.asarray(q, dtype=float))
            if m is None:
                m, n = A.shape
            if A.shape != (m, n) or c.shape != (m,) or q.shape != (n,):
                raise ValueError("piece dimensions are inconsistent")
            norm.append((A, c, q, float(r)))
        object.__setattr__(self, "pieces", tuple(norm))

    @property
    def n_pieces(self) -> int:
        return len(self.pieces)

    @property
    def uncertainty_dim(self) -> int:
        return self.pieces[0][0].shape[0]

    @property
    def decision_dim(self) -> int:
        return self.pieces[0][0].shape[1]

    def at_decision(self, x) -> list:
        """Instantiate pieces at a fixed decision: list of (a_i, b_i)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return [(A @ x + c, float(q @ x + r)) for A, c, q, r in self.pieces]

    def evaluate(self, x, w) -> float:
        w = np.atleast_1d(np.asarray(w, dtype=float))
        return max(float(a @ w) + b for a, b in self.at_decision(x))


@dataclass(frozen=True)
class DecisionModel:
    """First-stage decision block: linear objective part, linear constraints,
    optional bounds and binary flags, optional variable names."""

    n: int
    cost: np.ndarray
    constant: float = 0.0
    constraints: tuple = ()  # ((coeffs, rel, rhs, name), ...)
    binaries: frozenset = frozenset()
    lower: tuple | None = None
    upper: tuple | None = None
    names: tuple | None = None

    def __post_init__(self):
        cost = np.zeros(self.n) if self.cost is None else np.asarray(self.cost, dtype=float)
        if cost.shape != (self.n,):
            raise ValueError("cost vector length mismatch")
        object.__setattr__(self, "cost", cost)
        for idx in self.binaries:
            if not (0 <= idx < self.n):
                raise ValueError(f"binary index {idx} out of range")
        for coeffs, rel, rhs, _ in self.constraints:
            for j, _v in coeffs:
                if not (0 <= j < self.n):
                    raise ValueError(f"constraint references decision index {j}")
            if rel not in (LE, EQ, GE):
                raise ValueError(f"bad relation {rel!r}")
        if self.names is not None and len(self.names) != self.n:
            raise ValueError("names length mismatch")

    def bound(self, j: int):
        lo = None if self.lower is None else self.lower[j]
        hi = None if self.upper is None else self.upper[j]
        if j in self.binaries:
            lo = 0.0 if lo is None else lo
            hi = 1.0 if hi is None else hi
        return lo, hi

    def name(self, j: int) -> str:
        return self.names[j] if self.names is not None else f"x[{j}]"

    @staticmethod
    def free_scalar(lower=None, upper=None) -> "DecisionModel":
        return DecisionModel(
            n=1, cost=np.zeros(1), lower=(lower,), upper=(upper,)
        )


def _norm_rows(builder, norm, support, lam_idx, psi_idx, a_const, a_matrix, x_idx, tag):
    """Rows enforcing ||C^T psi - a_i(x)||_* <= lambda_k.

    a_i(x) = a_matrix @ x + a_const; a_matrix is None for fixed decisions.
    """
    C = support.C
    m = support.m
    if norm == "l1":  # dual norm is l-infinity: 2m sign rows
        for j in range(m):
            base = [(psi_idx[r], C[r, j]) for r in range(support.n_rows) if C[r, j] != 0.0]
            xpart = []
            if a_matrix is not None:
                xpart = [(x_idx[t], -a_matrix[j, t]) for t in range(len(x_idx)) if a_matrix[j, t] != 0.0]
            builder.add_constraint(
                base + xpart + [(lam_idx, -1.0)], LE, a_const[j], name=f"np{tag}[{j}]"
            )
            neg = [(idx, -v) for idx, v in base + xpart]
            builder.add_constraint(
                neg + [(lam_idx, -1.0)], LE, -a_const[j], name=f"nm{tag}[{j}]"
            )
    elif norm == "linf":  # dual norm is l1: aux t_j with sum t_j <= lambda_k
        t_idx = [
            builder.add_variable(f"t{tag}[{j}]", lower=0.0) for j in range(m)
        ]
        for j in range(m):
            base = [(psi_idx[r], C[r, j]) for r in range(support.n_rows) if C[r, j] != 0.0]
            xpart = []
            if a_matrix is not None:
                xpart = [(x_idx[t], -a_matrix[j, t]) for t in range(len(x_idx)) if a_matrix[j, t] != 0.0]
            builder.add_constraint(
                base + xpart + [(t_idx[j], -1.0)], LE, a_const[j], name=f"np{tag}[{j}]"
            )
            neg = [(idx, -v) for idx, v in base + xpart]
            builder.add_constraint(
                neg + [(t_idx[j], -1.0)], LE, -a_const[j], name=f"nm{tag}[{j}]"
            )
        builder.add_constraint(
            [(t_idx[j], 1.0) for j in range(m)] + [(lam_idx, -1.0)], LE, 0.0, name=f"nb{tag}"
        )
    else:
        raise ValueError(f"unknown ground norm {norm!r}; choose from {_NORMS}")


def dual_program(
    ambiguity: BnwdroSet | WdroSet,
    loss: PiecewiseAffineLoss,
    support: Polytope,
    decision: DecisionModel,
    norm: str = "l1",
) -> ProgramDescription:
    """Robust counterpart as a finite LP/MILP over (x, lambda, alpha, psi).

    A single global ball is treated as the one-ball case of the weighted
    family, so its program is variable-for-variable identical to a
    single-cluster build. Unbounded supports are accepted; an infinite worst
    case then surfaces as an infeasible dual-norm block at solve time.
    """
    balls = as_balls(ambiguity)
    m = support.m
    if loss.uncertainty_dim != m:
        raise ValueError("loss and support disagree on the uncertainty dimension")
    if loss.decision_dim != decision.n:
        raise ValueError("loss and decision disagree on the decision dimension")

    builder = ProgramBuilder(name=f"dual-{norm}", sense="min")
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
    lam_idx = [
        builder.add_variable(f"lam[{k}]", lower=0.0, objective=float(b.weight) * b.radius)
        for k, b in enumerate(balls)
    ]
    alpha_idx = []
    atom_rows = []  # (ball index, atom point, global atom index)
    gidx = 0
    for k, ball in enumerate(balls):
        n_k = ball.center.n_atoms
        for a in range(n_k):
            alpha_idx.append(
                builder.add_variable(
                    f"alpha[{gidx}]", objective=float(ball.weight) / n_k
                )
            )
            atom_rows.append((k, ball.center.points[a], gidx))
            gidx += 1
    psi_blocks = {}
    for k, w_hat, l in atom_rows:
        for i in range(loss.n_pieces):
            psi_blocks[(l, i)] = [
                builder.add_variable(f"psi[{l}][{i}][{r}]", lower=0.0)
                for r in range(support.n_rows)
            ]

    for k, w_hat, l in atom_rows:
        slack = support.d - support.C @ w_hat
        for i, (A_i, c_i, q_i, r_i) in enumerate(loss.pieces):
            psi_idx = psi_blocks[(l, i)]
            # alpha_l >= <A_i x + c_i, w_hat> + <psi, d - C w_hat> + <q_i, x> + r_i
            xcoef = A_i.T @ w_hat + q_i
            row = [(alpha_idx[l], 1.0)]
            row += [(x_idx[t], -xcoef[t]) for t in range(decision.n) if xcoef[t] != 0.0]
            row += [(psi_idx[r], -slack[r]) for r in range(support.n_rows) if slack[r] != 0.0]
            builder.add_constraint(row, GE, float(c_i @ w_hat) + r_i, name=f"wc[{l}][{i}]")
    for k, w_hat, l in atom_rows:
        for i, (A_i, c_i, q_i, r_i) in enumerate(loss.pieces):
            _norm_rows(
                builder,
                norm,
                support,
                lam_idx[k],
                psi_blocks[(l, i)],
                c_i,
                A_i,
                x_idx,
                tag=f"[{l}][{i}]",
            )

    for coeffs, rel, rhs, cname in decision.constraints:
        builder.add_constraint(
            [(x_idx[j], v) for j, v in coeffs], rel, rhs, name=cname
        )

    builder.metadata = {
        "role_x": [builder.name_at(j) for j in x_idx],
        "role_lambda": [builder.name_at(j) for j in lam_idx],
        "role_alpha": [builder.name_at(j) for j in alpha_idx],
        "role_psi": {
            f"{l},{i}": [builder.name_at(j) for j in idx]
            for (l, i), idx in psi_blocks.items()
        },
        "norm": norm,
    }
    return builder.build()


def fixed_decision_program(
    ambiguity: BnwdroSet | WdroSet,
    loss_at_x,
    support: Polytope,
    norm: str = "l1",
) -> ProgramDescription:
    """Worst-case expectation LP for an already-fixed decision.

    ``loss_at_x`` is the list of instantiated pieces (a_i vector, b_i scalar).
    The optimal value is the worst-case expected loss (no f part).
    """
    balls = as_balls(ambiguity)
    pieces = [(np.atleast_1d(np.asarray(a, dtype=float)), float(b)) for a, b in loss_at_x]
    m = support.m
    if any(a.shape != (m,) for a, _ in pieces):
        raise ValueError("piece gradients must match the support dimension")

    builder = ProgramBuilder(name=f"fixed-dual-{norm}", sense="min")
    lam_idx = [
        builder.add_variable(f"lam[{k}]", lower=0.0, objective=float(b.weight) * b.radius)
        for k, b in enumerate(balls)
    ]
    alpha_idx = []
    atom_rows = []
    gidx = 0
    for k, ball in enumerate(balls):
        n_k = ball.center.n_atoms
        for a in range(n_k):
            alpha_idx.append(
                builder.add_variable(f"alpha[{gidx}]", objective=float(ball.weight) / n_k)
            )
            atom_rows.append((k, ball.center.points[a], gidx))
            gidx += 1

    for k, w_hat, l in atom_rows:
        slack = support.d - support.C @ w_hat
        for i, (a_i, b_i) in enumerate(pieces):
            psi_idx = [
                builder.add_variable(f"psi[{l}][{i}][{r}]", lower=0.0)
                for r in range(support.n_rows)
            ]
            row = [(alpha_idx[l], 1.0)]
            row += [(psi_idx[r], -slack[r]) for r in range(support.n_rows) if slack[r] != 0.0]
            builder.add_constraint(row, GE, float(a_i @ w_hat) + b_i, name=f"wc[{l}][{i}]")
            _norm_rows(
                builder, norm, support, lam_idx[k], psi_idx, a_i, None, [], tag=f"[{l}][{i}]"
            )
    builder.metadata = {"norm": norm, "fixed_decision": True}
    return builder.build()


def worst_case_status(result) -> str:
    """Map a dual-program solve status to the worst-case interpretation.

    An infeasible dual certifies an infinite worst-case expectation, which is
    reported as Unbounded rather than an exception.
    """
    if result.status == INFEASIBLE:
        return UNBOUNDED
    return result.status
