"""Experiment harness: newsvendor and mini unit-commitment studies comparing
the cluster-ball, global-ball, moment and sample-average methods, plus
reliability and containment campaigns.

Every trial draws a fresh dataset (seed + trial index), runs each method on
the same data, and evaluates the returned decision out of sample with common
random numbers, so per-trial comparisons are paired. The stochastic-program
reference under the true distribution is a large-sample average solved once.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover - version shim
    import tomli as tomllib

from .dataset import MixtureSpec, sample_mixture
from .dpmm import DpmmConfig
from .errors import ConfigError
from .oracle import ReliabilityReport, monte_carlo_cost, reliability_experiment, sandwich_check
from .pipeline import METHODS, MethodConfig, solve_method
from .reformulate import DecisionModel, PiecewiseAffineLoss, Polytope
from .solver import SolverConfig
from .uc import UcInstance, UcUnit, audit_uc_solution, build_uc_model, deterministic_uc

_EVAL_SEED_OFFSET = 777_000_003
_REFERENCE_SEED = 31_337
_LOSS_SEED_OFFSET = 424_243


@dataclass(frozen=True)
class RunConfig:
    """One experiment run, loadable from a TOML file."""

    experiment: str
    sampler: MixtureSpec
    n_list: tuple = (25, 50, 100)
    trials: int = 20
    beta: float = 0.95
    dpmm: DpmmConfig = field(default_factory=DpmmConfig)
    norm: str = "l1"
    solver: SolverConfig = field(default_factory=SolverConfig)
    out_dir: str = "out"
    seed: int = 0
    methods: tuple = METHODS
    eval_samples: int = 10_000
    slow: bool = False
    # newsvendor specifics
    holding_cost: float = 1.0
    backlog_cost: float = 2.0
    support: tuple = (-10.0, 10.0)
    mdro_resolution: float | None = None
    # reliability specifics
    reliability_method: str = "bnwdro"
    theta_override: float | None = None
    # sandwich specifics
    sandwich_losses: int = 5
    # uc specifics
    uc: UcInstance | None = None

    def __post_init__(self):
        if self.experiment not in ("newsvendor", "uc", "reliability", "sandwich"):
            raise ConfigError(f"unknown experiment tag {self.experiment!r}")
        if not self.n_list or any(n < 1 for n in self.n_list):
            raise ConfigError("n_list must be nonempty and positive")
        if self.trials < 1:
            raise ConfigError("trials must be >= 1")
        if not (0 < self.beta < 1):
            raise ConfigError("beta must lie in (0, 1)")


@dataclass(frozen=True)
class ComparisonReport:
    """Per-trial rows plus per-(method, N) quantile summaries."""

    experiment: str
    methods: tuple
    n_list: tuple
    rows: tuple  # per-trial dicts
    reference: float | None = None

    def summary(self) -> list:
        out = []
        for method in self.methods:
            for n in self.n_list:
                sel = [
                    r
                    for r in self.rows
                    if r["method"] == method and r["N"] == n and "error" not in r
                ]
                if not sel:
                    continue
                entry = {"method": method, "N": n}
                for key, label in (
                    ("certificate", "certificate"),
                    ("out_of_sample", "out_of_sample"),
                ):
                    vals = np.array([r[key] for r in sel])
                    entry[label] = {
                        "mean": float(np.mean(vals)),
                        "q10": float(np.quantile(vals, 0.10)),
                        "q90": float(np.quantile(vals, 0.90)),
                    }
                covered = np.array([bool(r["covered"]) for r in sel])
                entry["reliability"] = float(np.mean(covered))
                entry["trials"] = len(sel)
                entry["heavy_tail_warning"] = any(
                    not (entry[k]["q10"] <= entry[k]["mean"] <= entry[k]["q90"])
                    for k in ("certificate", "out_of_sample")
                )
                out.append(entry)
        return out


def newsvendor_loss(holding_cost: float, backlog_cost: float) -> PiecewiseAffineLoss:
    """max{c_h (x - w), c_b (w - x)} for scalar order quantity and demand."""
    if holding_cost <= 0 or backlog_cost <= 0:
        raise ConfigError("holding and backlog costs must be positive")
    return PiecewiseAffineLoss(
        pieces=(
            (np.zeros((1, 1)), [-holding_cost], [holding_cost], 0.0),
            (np.zeros((1, 1)), [backlog_cost], [-backlog_cost], 0.0),
        )
    )


def _newsvendor_method_config(config: RunConfig) -> MethodConfig:
    lo, hi = config.support
    return MethodConfig(
        loss=newsvendor_loss(config.holding_cost, config.backlog_cost),
        support=Polytope.interval(lo, hi),
        decision=DecisionModel.free_scalar(lower=lo, upper=hi),
        beta=config.beta,
        norm=config.norm,
        dpmm=config.dpmm,
        solver=config.solver,
        mdro_resolution=config.mdro_resolution,
        theta_override=config.theta_override,
    )


def saa_reference_newsvendor(config: RunConfig, n: int = 10_000) -> float:
    """Large-sample stochastic-program value under the true distribution.

    The sample optimum of this loss is the backlog/(backlog+holding)
    quantile, so the reference is computed by sorting rather than an LP.
    """
    draws = sample_mixture(config.sampler, n, _REFERENCE_SEED).points[:, 0]
    q = config.backlog_cost / (config.backlog_cost + config.holding_cost)
    x_star = float(np.quantile(draws, q))
    cost = np.maximum(
        config.holding_cost * (x_star - draws), config.backlog_cost * (draws - x_star)
    )
    return float(np.mean(cost))


def run_newsvendor(config: RunConfig) -> ComparisonReport:
    """Sample, cluster, calibrate, reformulate, solve and evaluate per trial."""
    method_config = _newsvendor_method_config(config)
    rows = []
    for n in config.n_list:
        for t in range(config.trials):
            data_seed = config.seed + t
            data = sample_mixture(config.sampler, n, data_seed)
            # common random numbers: same evaluation draws across N and methods
            eval_seed = _EVAL_SEED_OFFSET + data_seed
            for method in config.methods:
                try:
                    sol = solve_method(method, data, method_config)
                    oos, _ = monte_carlo_cost(
                        sol.decision,
                        method_config.loss,
                        config.sampler,
                        config.eval_samples,
                        seed=eval_seed,
                    )
                    oos += sol.first_stage_cost
                    rows.append(
                        {
                            "method": method,
                            "N": n,
                            "trial": t,
                            "certificate": sol.certificate,
                            "out_of_sample": oos,
                            "covered": bool(oos <= sol.certificate + 1e-12),
                            "clusters": sol.clusters,
                            "decision": [float(v) for v in sol.decision],
                        }
                    )
                except Exception as exc:  # noqa: BLE001 - recorded per trial
                    rows.append(
                        {
                            "method": method,
                            "N": n,
                            "trial": t,
                            "error": f"{type(exc).__name__}: {exc}",
                        }
                    )
    return ComparisonReport(
        experiment="newsvendor",
        methods=tuple(config.methods),
        n_list=tuple(config.n_list),
        rows=tuple(rows),
        reference=saa_reference_newsvendor(config),
    )


def _uc_method_config(config: RunConfig, model) -> MethodConfig:
    instance = config.uc
    return MethodConfig(
        loss=model.loss,
        support=instance.support(),
        decision=model.decision,
        beta=config.beta,
        norm=config.norm,
        dpmm=config.dpmm,
        solver=config.solver,
        mdro_resolution=config.mdro_resolution,
        theta_override=config.theta_override,
    )


def saa_reference_uc(config: RunConfig, n: int = 10_000) -> float:
    """UC stochastic program under the truth: the adjustment bill is the
    participation-weighted mean absolute error, which stays linear."""
    instance = config.uc
    draws = sample_mixture(config.sampler, n, _REFERENCE_SEED).points[:, 0]
    mean_abs = float(np.mean(np.abs(draws)))
    model = build_uc_model(instance)
    adjusted_cost = model.decision.cost.copy()
    for i, unit in enumerate(instance.units):
        for t in range(instance.horizon):
            adjusted_cost[model.index["af"][(i, t)]] += unit.adjust_cost * mean_abs
    decision = replace(model.decision, cost=adjusted_cost)
    sp = deterministic_uc_with_decision(decision, config.solver)
    return sp.objective


def deterministic_uc_with_decision(decision: DecisionModel, solver: SolverConfig):
    from .program import ProgramBuilder
    from .solver import solve_milp

    builder = ProgramBuilder(name="uc-sp-reference", sense="min")
    for j in range(decision.n):
        lo, hi = decision.bound(j)
        builder.add_variable(
            decision.name(j), lower=lo, upper=hi, binary=j in decision.binaries,
            objective=float(decision.cost[j]),
        )
    for coeffs, rel, rhs, name in decision.constraints:
        builder.add_constraint(list(coeffs), rel, rhs, name=name)
    result = solve_milp(builder.build(), solver)
    if result.status != "Optimal":
        raise RuntimeError(f"reference UC solve ended with {result.status}")
    return result


def run_uc(config: RunConfig, instance: UcInstance | None = None) -> ComparisonReport:
    """Robust unit commitment per method per trial on forecast-error data."""
    if instance is not None:
        config = replace(config, uc=instance)
    if config.uc is None:
        raise ConfigError("uc experiment requires an instance")
    model = build_uc_model(config.uc)
    method_config = _uc_method_config(config, model)
    rows = []
    for n in config.n_list:
        for t in range(config.trials):
            data_seed = config.seed + t
            data = sample_mixture(config.sampler, n, data_seed)
            eval_seed = _EVAL_SEED_OFFSET + data_seed
            for method in config.methods:
                try:
                    sol = solve_method(method, data, method_config)
                    audit_uc_solution(config.uc, model, sol.result.assignment)
                    oos, _ = monte_carlo_cost(
                        sol.decision, model.loss, config.sampler,
                        config.eval_samples, seed=eval_seed,
                    )
                    oos += sol.first_stage_cost
                    rows.append(
                        {
                            "method": method,
                            "N": n,
                            "trial": t,
                            "certificate": sol.certificate,
                            "out_of_sample": oos,
                            "covered": bool(oos <= sol.certificate + 1e-12),
                            "clusters": sol.clusters,
                        }
                    )
                except Exception as exc:  # noqa: BLE001
                    rows.append(
                        {
                            "method": method,
                            "N": n,
                            "trial": t,
                            "error": f"{type(exc).__name__}: {exc}",
                        }
                    )
    return ComparisonReport(
        experiment="uc",
        methods=tuple(config.methods),
        n_list=tuple(config.n_list),
        rows=tuple(rows),
        reference=saa_reference_uc(config),
    )


def run_reliability(config: RunConfig) -> ComparisonReport:
    """Certificate coverage of one method across the sample-size grid."""
    method_config = _newsvendor_method_config(config)
    rows = []
    for n in config.n_list:
        report: ReliabilityReport = reliability_experiment(
            trials=config.trials,
            n_points=n,
            sampler=config.sampler,
            method=config.reliability_method,
            method_config=method_config,
            eval_samples=config.eval_samples,
            seed=config.seed,
        )
        for r in report.rows:
            row = {"method": config.reliability_method, "N": n, "trial": r["trial"]}
            if "error" in r:
                row["error"] = r["error"]
            else:
                row.update(
                    certificate=r["certificate"],
                    out_of_sample=r["true_cost"],
                    covered=r["covered"],
                )
            rows.append(row)
    return ComparisonReport(
        experiment="reliability",
        methods=(config.reliability_method,),
        n_list=tuple(config.n_list),
        rows=tuple(rows),
        reference=saa_reference_newsvendor(config),
    )


def random_affine_losses(rng: np.random.Generator, count: int, m: int, max_pieces: int = 4):
    """Seeded family of fixed-decision piecewise losses for fuzz campaigns."""
    losses = []
    for _ in range(count):
        n_pieces = int(rng.integers(1, max_pieces + 1))
        losses.append(
            [
                (rng.uniform(-2.0, 2.0, size=m), float(rng.uniform(-1.0, 1.0)))
                for _ in range(n_pieces)
            ]
        )
    return losses


def run_sandwich(config: RunConfig) -> ComparisonReport:
    """Containment chain campaign: per trial, cluster a fresh dataset, build
    the local-ball set, and check it sits between its squeezing balls on a
    seeded family of random losses."""
    from . import ambiguity as amb
    from . import dpmm as dp

    lo, hi = config.support
    support = Polytope.interval(lo, hi)
    rows = []
    for t in range(config.trials):
        data = sample_mixture(config.sampler, max(config.n_list), config.seed + t)
        posterior = dp.fit(data, config.dpmm)
        clustering = dp.partition(data, dp.hard_labels(posterior))
        built = amb.build_bnwdro(data, clustering, config.beta)
        rng = np.random.Generator(np.random.Philox(key=np.uint64(_LOSS_SEED_OFFSET + t)))
        losses = random_affine_losses(rng, config.sandwich_losses, m=1)
        report = sandwich_check(built, losses, support, config.norm, config.solver)
        for r in report.rows:
            rows.append({"method": "bnwdro", "N": data.n, "trial": t, **r})
    return ComparisonReport(
        experiment="sandwich",
        methods=("bnwdro",),
        n_list=tuple(config.n_list),
        rows=tuple(rows),
        reference=None,
    )


def run_experiment(config: RunConfig) -> ComparisonReport:
    if config.experiment == "newsvendor":
        return run_newsvendor(config)
    if config.experiment == "uc":
        return run_uc(config)
    if config.experiment == "reliability":
        return run_reliability(config)
    return run_sandwich(config)


# -- configuration file ------------------------------------------------------


def _mixture_from_dict(payload) -> MixtureSpec:
    try:
        comps = tuple(
            (float(c["weight"]), c["mean"], c["cov"]) for c in payload["components"]
        )
        return MixtureSpec(components=comps, seed=int(payload.get("seed", 0)))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad sampler spec: {exc}") from exc


def _uc_from_dict(payload) -> UcInstance:
    try:
        units = tuple(
            UcUnit(
                startup_cost=u["startup_cost"],
                shutdown_cost=u["shutdown_cost"],
                reserve_up_cost=u["reserve_up_cost"],
                reserve_down_cost=u["reserve_down_cost"],
                adjust_cost=u["adjust_cost"],
                p_min=u["p_min"],
                p_max=u["p_max"],
                ramp_up=u["ramp_up"],
                ramp_down=u["ramp_down"],
                startup_ramp=u["startup_ramp"],
                shutdown_ramp=u["shutdown_ramp"],
                min_up=u["min_up"],
                min_down=u["min_down"],
                cost_breakpoints=tuple((p, c) for p, c in u["cost_breakpoints"]),
                initial_on=int(u.get("initial_on", 0)),
                initial_power=float(u.get("initial_power", 0.0)),
            )
            for u in payload["units"]
        )
        return UcInstance(
            units=units,
            horizon=int(payload["horizon"]),
            load=tuple(payload["load"]),
            wind=tuple(payload["wind"]),
            error_lower=float(payload["error_lower"]),
            error_upper=float(payload["error_upper"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad uc instance: {exc}") from exc


def load_config(path) -> RunConfig:
    """Parse the TOML run-configuration file; schema documented in README."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} does not exist")
    try:
        payload = tomllib.loads(path.read_text(encoding="utf-8"))
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc
    try:
        sampler = _mixture_from_dict(payload["sampler"])
    except KeyError:
        raise ConfigError("config must define a [sampler] table") from None

    dpmm_cfg = DpmmConfig(**payload.get("dpmm", {}))
    solver_cfg = SolverConfig(**payload.get("solver", {}))
    nv = payload.get("newsvendor", {})
    rel = payload.get("reliability", {})
    kwargs = dict(
        experiment=payload.get("experiment", "newsvendor"),
        sampler=sampler,
        n_list=tuple(payload.get("n_list", (25, 50, 100))),
        trials=int(payload.get("trials", 20)),
        beta=float(payload.get("beta", 0.95)),
        dpmm=dpmm_cfg,
        norm=payload.get("norm", "l1"),
        solver=solver_cfg,
        out_dir=payload.get("out_dir", "out"),
        seed=int(payload.get("seed", 0)),
        methods=tuple(payload.get("methods", METHODS)),
        eval_samples=int(payload.get("eval_samples", 10_000)),
        slow=bool(payload.get("slow", False)),
        holding_cost=float(nv.get("holding_cost", 1.0)),
        backlog_cost=float(nv.get("backlog_cost", 2.0)),
        support=tuple(nv.get("support", (-10.0, 10.0))),
        mdro_resolution=nv.get("mdro_resolution"),
        reliability_method=rel.get("method", "bnwdro"),
        theta_override=rel.get("theta_override"),
        sandwich_losses=int(payload.get("sandwich", {}).get("losses", 5)),
        uc=_uc_from_dict(payload["uc"]) if "uc" in payload else None,
    )
    try:
        return RunConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid configuration: {exc}") from exc
