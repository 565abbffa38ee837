import numpy as np
import pytest
from fractions import Fraction

from drokit.ambiguity import BnwdroSet, LocalBall, WdroSet
from drokit.dataset import DiscreteDistribution
from drokit.errors import EmptySupport
from drokit.experiments import newsvendor_loss
from drokit.program import ProgramDescription
from drokit.reformulate import (
    DecisionModel,
    PiecewiseAffineLoss,
    Polytope,
    dual_program,
    fixed_decision_program,
    worst_case_status,
)
from drokit.solver import OPTIMAL, UNBOUNDED, solve_lp

from fixture_lib import make_scalar_fixture

UNIT = Polytope.interval(0.0, 1.0)
HALF_ATOM = DiscreteDistribution(points=[[0.5]], weights=[1.0])
LINEAR = [(np.array([1.0]), 0.0)]


def test_polytope_box_and_flags():
    assert UNIT.bounded
    assert UNIT.box_lower.tolist() == [0.0]
    assert UNIT.box_upper.tolist() == [1.0]
    open_ray = Polytope(C=[[-1.0]], d=[0.0])  # w >= 0
    assert not open_ray.bounded


def test_polytope_empty_raises():
    with pytest.raises(EmptySupport):
        Polytope(C=[[1.0], [-1.0]], d=[0.0, -1.0])  # w <= 0 and w >= 1


def test_zero_radius_is_sample_average():
    prog = fixed_decision_program(WdroSet(center=HALF_ATOM, radius=0.0), LINEAR, UNIT)
    assert abs(solve_lp(prog).objective - 0.5) <= 1e-9


def test_small_radius_shifts_by_theta():
    prog = fixed_decision_program(WdroSet(center=HALF_ATOM, radius=0.1), LINEAR, UNIT)
    assert abs(solve_lp(prog).objective - 0.6) <= 1e-9


def test_two_ball_weighted_sum():
    b1 = LocalBall(
        center=DiscreteDistribution(points=[[0.0]], weights=[1.0]),
        radius=0.1, weight=Fraction(1, 2),
    )
    b2 = LocalBall(
        center=DiscreteDistribution(points=[[1.0]], weights=[1.0]),
        radius=0.3, weight=Fraction(1, 2),
    )
    prog = fixed_decision_program(
        BnwdroSet(balls=(b1, b2)), LINEAR, Polytope.interval(0.0, 2.0)
    )
    assert abs(solve_lp(prog).objective - 0.7) <= 1e-9


def test_support_caps_transport():
    prog = fixed_decision_program(WdroSet(center=HALF_ATOM, radius=10.0), LINEAR, UNIT)
    assert abs(solve_lp(prog).objective - 1.0) <= 1e-9


def test_absolute_loss_moves_mass_theta():
    zero = DiscreteDistribution(points=[[0.0]], weights=[1.0])
    prog = fixed_decision_program(
        WdroSet(center=zero, radius=0.2),
        [(np.array([1.0]), 0.0), (np.array([-1.0]), 0.0)],
        Polytope.interval(-1.0, 1.0),
    )
    assert abs(solve_lp(prog).objective - 0.2) <= 1e-9


def test_fixed_zero_radius_is_empirical_max():
    atoms = DiscreteDistribution(points=[[0.1], [0.4], [0.8]], weights=[1 / 3] * 3)
    loss = [(np.array([2.0]), -0.3), (np.array([-1.0]), 0.5)]
    prog = fixed_decision_program(WdroSet(center=atoms, radius=0.0), loss, UNIT)
    expected = np.mean([max(2 * w - 0.3, -w + 0.5) for w in (0.1, 0.4, 0.8)])
    assert abs(solve_lp(prog).objective - expected) <= 1e-9


def test_dual_program_solves_newsvendor():
    atoms = DiscreteDistribution(points=[[0.2], [0.5], [0.9]], weights=[1 / 3] * 3)
    loss = newsvendor_loss(1.0, 2.0)
    dm = DecisionModel.free_scalar(lower=0.0, upper=1.0)
    prog = dual_program(WdroSet(center=atoms, radius=0.05), loss, UNIT, dm)
    res = solve_lp(prog)
    assert res.status == OPTIMAL
    # golden-section style scan over the decision as an independent path
    best = min(
        solve_lp(
            fixed_decision_program(
                WdroSet(center=atoms, radius=0.05), loss.at_decision([x]), UNIT
            )
        ).objective
        for x in np.linspace(0.0, 1.0, 401)
    )
    assert res.objective <= best + 1e-9
    assert abs(res.objective - best) <= 5e-4  # scan resolution


def test_zero_radius_dual_program_is_saa():
    rng = np.random.default_rng(17)
    pts = rng.uniform(0.0, 1.0, size=(6, 1))
    atoms = DiscreteDistribution(points=pts, weights=np.full(6, 1 / 6))
    loss = newsvendor_loss(1.3, 0.7)
    dm = DecisionModel.free_scalar(lower=0.0, upper=1.0)
    prog = dual_program(WdroSet(center=atoms, radius=0.0), loss, UNIT, dm)
    res = solve_lp(prog)
    # exact SAA oracle: the optimal order quantity is one of the data points
    saa = min(
        float(np.mean(np.maximum(1.3 * (x - pts[:, 0]), 0.7 * (pts[:, 0] - x))))
        for x in pts[:, 0]
    )
    assert abs(res.objective - saa) <= 1e-8


def test_single_ball_program_byte_identical_to_global_ball():
    atoms = DiscreteDistribution(points=[[0.2], [0.7]], weights=[0.5, 0.5])
    loss = newsvendor_loss(1.0, 2.0)
    dm = DecisionModel.free_scalar(lower=0.0, upper=1.0)
    single = BnwdroSet(
        balls=(LocalBall(center=atoms, radius=0.11, weight=Fraction(1)),)
    )
    p1 = dual_program(single, loss, UNIT, dm)
    p2 = dual_program(WdroSet(center=atoms, radius=0.11), loss, UNIT, dm)
    assert p1.to_canonical_json() == p2.to_canonical_json()


def test_monotone_in_radius():
    rng = np.random.default_rng(23)
    ambiguity, loss, support = make_scalar_fixture(rng)
    values = []
    for scale in (0.0, 0.5, 1.0, 2.0):
        scaled = BnwdroSet(
            balls=tuple(
                LocalBall(center=b.center, radius=b.radius * scale, weight=b.weight)
                for b in ambiguity.balls
            )
        )
        values.append(solve_lp(fixed_decision_program(scaled, loss, support)).objective)
    assert all(a <= b + 1e-9 for a, b in zip(values, values[1:]))


def test_linf_ground_norm_variant():
    # scalar case: l1 and linf ground norms coincide
    prog1 = fixed_decision_program(WdroSet(center=HALF_ATOM, radius=0.1), LINEAR, UNIT, "l1")
    prog2 = fixed_decision_program(WdroSet(center=HALF_ATOM, radius=0.1), LINEAR, UNIT, "linf")
    assert abs(solve_lp(prog1).objective - solve_lp(prog2).objective) <= 1e-9


def test_linf_ground_norm_2d():
    # one atom at origin, loss w1 + w2, box [-1,1]^2.
    # linf ball of radius t reaches (t, t): value 2t; l1 ball: value t.
    atom = DiscreteDistribution(points=[[0.0, 0.0]], weights=[1.0])
    box = Polytope.box([-1.0, -1.0], [1.0, 1.0])
    loss = [(np.array([1.0, 1.0]), 0.0)]
    v_linf = solve_lp(
        fixed_decision_program(WdroSet(center=atom, radius=0.25), loss, box, "linf")
    ).objective
    v_l1 = solve_lp(
        fixed_decision_program(WdroSet(center=atom, radius=0.25), loss, box, "l1")
    ).objective
    assert abs(v_linf - 0.5) <= 1e-9
    assert abs(v_l1 - 0.25) <= 1e-9


def test_unbounded_support_accepted_with_finite_worst_case():
    # linear growth on a ray: transport budget caps the mean, value = a*(w0+theta)
    ray = Polytope(C=[[-1.0]], d=[0.0])  # w >= 0, unbounded above
    prog = fixed_decision_program(
        WdroSet(center=DiscreteDistribution(points=[[1.0]], weights=[1.0]), radius=0.5),
        [(np.array([2.0]), 0.0)],
        ray,
    )
    result = solve_lp(prog)
    assert result.status == OPTIMAL
    assert abs(result.objective - 3.0) <= 1e-9


def test_worst_case_status_maps_infeasible_dual_to_unbounded():
    from drokit.solver import INFEASIBLE, SolveResult

    assert worst_case_status(SolveResult(status=INFEASIBLE)) == UNBOUNDED
    assert worst_case_status(SolveResult(status=OPTIMAL, objective=1.0)) == OPTIMAL


def test_program_metadata_roles():
    atoms = DiscreteDistribution(points=[[0.2], [0.7]], weights=[0.5, 0.5])
    prog = dual_program(
        WdroSet(center=atoms, radius=0.1),
        newsvendor_loss(1.0, 1.0),
        UNIT,
        DecisionModel.free_scalar(lower=0.0, upper=1.0),
    )
    md = prog.metadata
    assert md["role_x"] == ["x[0]"]
    assert md["role_lambda"] == ["lam[0]"]
    assert len(md["role_alpha"]) == 2
    names = {v.name for v in prog.variables}
    assert set(md["role_alpha"]) <= names
    canon = ProgramDescription.from_canonical_json(prog.to_canonical_json())
    assert canon.to_canonical_json() == prog.to_canonical_json()


def test_loss_validation():
    with pytest.raises(ValueError):
        PiecewiseAffineLoss(pieces=())
    with pytest.raises(ValueError):
        PiecewiseAffineLoss(
            pieces=(
                (np.zeros((1, 1)), [0.0], [0.0], 0.0),
                (np.zeros((2, 1)), [0.0, 0.0], [0.0], 0.0),
            )
        )


def test_dual_program_without_decision_dependence():
    # pieces with zero decision coefficients reproduce the fixed-decision values
    from drokit.program import ProgramBuilder  # noqa: F401  (import parity)

    loss = PiecewiseAffineLoss(pieces=((np.zeros((1, 1)), [1.0], [0.0], 0.0),))
    dm = DecisionModel.free_scalar(lower=0.0, upper=0.0)  # pinned dummy decision
    for radius, expected in ((0.0, 0.5), (0.1, 0.6)):
        prog = dual_program(WdroSet(center=HALF_ATOM, radius=radius), loss, UNIT, dm)
        assert abs(solve_lp(prog).objective - expected) <= 1e-9
    b1 = LocalBall(
        center=DiscreteDistribution(points=[[0.0]], weights=[1.0]),
        radius=0.1, weight=Fraction(1, 2),
    )
    b2 = LocalBall(
        center=DiscreteDistribution(points=[[1.0]], weights=[1.0]),
        radius=0.3, weight=Fraction(1, 2),
    )
    prog = dual_program(
        BnwdroSet(balls=(b1, b2)), loss, Polytope.interval(0.0, 2.0), dm
    )
    assert abs(solve_lp(prog).objective - 0.7) <= 1e-9
