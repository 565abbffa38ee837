"""Seeded fixture families shared by the reformulation, oracle and
acceptance tests: random bounded supports, local-ball ambiguity sets and
piecewise-affine losses, plus the paired dual/oracle evaluation helper."""

from fractions import Fraction

import numpy as np

from drokit.ambiguity import BnwdroSet, LocalBall
from drokit.dataset import DiscreteDistribution
from drokit.oracle import discretize_support, worst_case_oracle
from drokit.reformulate import Polytope, fixed_decision_program
from drokit.solver import solve_lp


def make_scalar_fixture(rng):
    lo = float(rng.uniform(-1.5, -0.3))
    hi = float(rng.uniform(0.4, 1.9))
    support = Polytope.interval(lo, hi)
    k = int(rng.integers(1, 4))
    raw = rng.uniform(1, 4, size=k)
    counts = np.maximum((raw / raw.sum() * 6).astype(int), 1)
    total = int(counts.sum())
    balls = []
    for ki in range(k):
        pts = rng.uniform(lo, hi, size=(counts[ki], 1))
        balls.append(
            LocalBall(
                center=DiscreteDistribution(
                    points=pts, weights=np.full(counts[ki], 1.0 / counts[ki])
                ),
                radius=float(rng.uniform(0.03, 0.35)),
                weight=Fraction(int(counts[ki]), total),
            )
        )
    ambiguity = BnwdroSet(balls=tuple(balls))
    n_pieces = int(rng.integers(1, 5))
    loss = [
        (rng.uniform(-2, 2, size=1), float(rng.uniform(-1, 1))) for _ in range(n_pieces)
    ]
    return ambiguity, loss, support


def make_2d_fixture(rng):
    lo = rng.uniform(-1.2, -0.2, size=2)
    hi = rng.uniform(0.3, 1.3, size=2)
    if rng.random() < 0.5:
        support = Polytope.box(lo, hi)
    else:
        cut = rng.uniform(0.4, 1.0, size=(1, 2))
        support = Polytope(
            C=np.vstack([np.eye(2), -np.eye(2), cut]),
            d=np.concatenate([hi, -lo, [float(rng.uniform(0.6, 1.4))]]),
        )
    k = int(rng.integers(1, 3))
    counts = [int(rng.integers(1, 4)) for _ in range(k)]
    total = sum(counts)
    balls = []
    for ki in range(k):
        pts = []
        while len(pts) < counts[ki]:
            p = rng.uniform(support.box_lower, support.box_upper)
            if support.contains(p):
                pts.append(p)
        balls.append(
            LocalBall(
                center=DiscreteDistribution(
                    points=np.array(pts), weights=np.full(counts[ki], 1.0 / counts[ki])
                ),
                radius=float(rng.uniform(0.05, 0.3)),
                weight=Fraction(counts[ki], total),
            )
        )
    ambiguity = BnwdroSet(balls=tuple(balls))
    n_pieces = int(rng.integers(1, 5))
    loss = [
        (rng.uniform(-2, 2, size=2), float(rng.uniform(-1, 1))) for _ in range(n_pieces)
    ]
    return ambiguity, loss, support


def atoms_of(ambiguity) -> np.ndarray:
    return np.vstack([b.center.points for b in ambiguity.balls])


def dual_value(ambiguity, loss, support, norm="l1") -> float:
    program = fixed_decision_program(ambiguity, loss, support, norm)
    result = solve_lp(program)
    assert result.status == "Optimal", result.status
    return result.objective


def oracle_value(ambiguity, loss, support, resolution, norm="l1") -> float:
    grid = discretize_support(support, resolution, extra_points=atoms_of(ambiguity))
    return worst_case_oracle(ambiguity, loss, grid, norm)


def gradient_bound(loss) -> float:
    """Maximum l-infinity norm over the piece gradients."""
    return max(float(np.abs(a).max()) for a, _ in loss)
