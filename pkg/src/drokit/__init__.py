"""drokit: data-driven distributionally robust optimization.

Clusters uncertainty data with a stick-breaking Dirichlet process Gaussian
mixture, calibrates cluster-local Wasserstein balls into a weighted
Minkowski-sum ambiguity set, reformulates the robust counterpart as a finite
LP/MILP, solves it with a built-in simplex and branch-and-bound engine, and
validates values against grid oracles and Monte Carlo experiments.
"""

from .ambiguity import (
    BnwdroSet,
    LocalBall,
    MdroSet,
    SandwichRadii,
    WdroSet,
    build_bnwdro,
    build_mdro,
    build_wdro,
    calibrate_radius,
    sandwich_radii,
)
from .dataset import (
    Dataset,
    DiscreteDistribution,
    MixtureSpec,
    empirical,
    load_csv,
    sample_mixture,
    save_csv,
    scalar_mixture,
)
from .dpmm import Clustering, DpmmConfig, DpmmPosterior, NormalWishartPrior, fit, hard_labels, partition
from .experiments import (
    ComparisonReport,
    RunConfig,
    load_config,
    newsvendor_loss,
    run_experiment,
    run_newsvendor,
    run_reliability,
    run_sandwich,
    run_uc,
)
from .oracle import (
    ReliabilityReport,
    SupportGrid,
    discretize_support,
    monte_carlo_cost,
    reliability_experiment,
    sandwich_check,
    worst_case_oracle,
)
from .pipeline import MethodConfig, MethodSolution, solve_method
from .program import ProgramDescription
from .reformulate import (
    DecisionModel,
    PiecewiseAffineLoss,
    Polytope,
    dual_program,
    fixed_decision_program,
)
from .report import emit_report
from .solver import (
    SolveResult,
    SolverConfig,
    export_mps,
    import_mps,
    solve_lp,
    solve_milp,
    verify_certificate,
)
from .uc import UcInstance, UcUnit, audit_uc_solution, build_uc_model, deterministic_uc

__version__ = "0.1.0"
