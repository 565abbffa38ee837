"""Command-line surface.

Subcommands: cluster, calibrate, build, solve, evaluate, experiment,
export-mps. Global flags: --config (TOML run configuration), --seed
(overrides the config seed), --out (output file/directory), --slow
(enables the million-sample evaluation tier). Exit codes: 0 success,
2 configuration error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import ambiguity as amb
from . import dpmm
from .dataset import load_csv
from .errors import ConfigError
from .experiments import load_config, run_experiment
from .oracle import monte_carlo_cost
from .pipeline import MethodConfig
from .program import ProgramDescription
from .reformulate import fixed_decision_program
from .report import emit_report
from .solver import OPTIMAL, export_mps, solve_lp, solve_milp

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3


def _global_flags(parser, suppress: bool):
    default = argparse.SUPPRESS if suppress else None
    parser.add_argument("--config", default=default, help="TOML run configuration file")
    parser.add_argument("--seed", type=int, default=default, help="override the config seed")
    parser.add_argument("--out", default=default, help="output file or directory")
    parser.add_argument(
        "--slow",
        action="store_true",
        default=argparse.SUPPRESS if suppress else False,
        help="enable the 10^6-sample evaluation tier",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="drokit",
        description="Data-driven distributionally robust optimization toolkit",
    )
    _global_flags(parser, suppress=False)
    sub = parser.add_subparsers(dest="command", metavar="command")

    p = sub.add_parser("cluster", help="fit the mixture model and emit a hard clustering")
    _global_flags(p, suppress=True)
    p.add_argument("--data", required=True, help="input CSV of uncertainty data")

    p = sub.add_parser("calibrate", help="calibrate Wasserstein radii from data")
    _global_flags(p, suppress=True)
    p.add_argument("--data", required=True)
    p.add_argument("--clustering", help="clustering JSON; omitted = pooled radius")

    p = sub.add_parser("build", help="assemble an ambiguity set description")
    _global_flags(p, suppress=True)
    p.add_argument("--data", required=True)
    p.add_argument("--kind", required=True, choices=("bnwdro", "wdro", "mdro"))
    p.add_argument("--clustering", help="clustering JSON (bnwdro)")

    p = sub.add_parser("solve", help="solve a program JSON with the built-in engine")
    _global_flags(p, suppress=True)
    p.add_argument("--program", required=True)

    p = sub.add_parser("evaluate", help="certificate and Monte Carlo cost of a decision")
    _global_flags(p, suppress=True)
    p.add_argument("--set", required=True, dest="ambiguity", help="ambiguity set JSON")
    p.add_argument("--decision", required=True, help="comma-separated decision vector")

    p = sub.add_parser("experiment", help="run the experiment named in the config")
    _global_flags(p, suppress=True)

    p = sub.add_parser("export-mps", help="export a program JSON to MPS")
    _global_flags(p, suppress=True)
    p.add_argument("--program", required=True)
    return parser


def _require_config(args) -> "RunConfig":
    if not args.config:
        raise ConfigError("this command requires --config")
    config = load_config(args.config)
    if args.seed is not None:
        config = replace(config, seed=args.seed)
    if args.slow:
        config = replace(config, slow=True, eval_samples=1_000_000)
    return config


def _clustering_from_file(path, dataset) -> dpmm.Clustering:
    payload = json.loads(Path(path).read_text(encoding="utf-8"))
    return dpmm.partition(dataset, payload["labels"])


def _write(out, text: str, default_name: str) -> Path:
    if out is None:
        sys.stdout.write(text + "\n")
        return None
    path = Path(out)
    if path.is_dir():
        path = path / default_name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    return path


def _cmd_cluster(args) -> int:
    config = _require_config(args)
    data = load_csv(args.data)
    posterior = dpmm.fit(data, config.dpmm)
    clustering = dpmm.partition(data, dpmm.hard_labels(posterior))
    _write(args.out, clustering.to_json(), "clustering.json")
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    config = _require_config(args)
    data = load_csv(args.data)
    if args.clustering:
        clustering = _clustering_from_file(args.clustering, data)
        radii = [
            amb.calibrate_radius(data.points[rows], config.beta)
            for rows in clustering.clusters
        ]
        payload = {"beta": config.beta, "radii": [float(format(r, ".12g")) for r in radii]}
    else:
        radius = amb.calibrate_radius(data.points, config.beta)
        payload = {"beta": config.beta, "radii": [float(format(radius, ".12g"))]}
    _write(args.out, json.dumps(payload, sort_keys=True), "radii.json")
    return EXIT_OK


def _cmd_build(args) -> int:
    config = _require_config(args)
    data = load_csv(args.data)
    if args.kind == "mdro":
        built = amb.build_mdro(data)
    elif args.kind == "wdro":
        built = amb.build_wdro(data, config.beta)
    else:
        if args.clustering:
            clustering = _clustering_from_file(args.clustering, data)
        else:
            posterior = dpmm.fit(data, config.dpmm)
            clustering = dpmm.partition(data, dpmm.hard_labels(posterior))
        built = amb.build_bnwdro(data, clustering, config.beta)
    _write(args.out, amb.to_json(built), "ambiguity.json")
    return EXIT_OK


def _cmd_solve(args) -> int:
    program = ProgramDescription.from_canonical_json(
        Path(args.program).read_text(encoding="utf-8")
    )
    result = solve_milp(program) if program.has_binaries else solve_lp(program)
    payload = {
        "status": result.status,
        "objective": result.objective,
        "assignment": result.assignment,
        "stats": {k: v for k, v in result.stats.items() if k != "wall_time"},
    }
    _write(args.out, json.dumps(payload, sort_keys=True), "result.json")
    return EXIT_OK if result.status == OPTIMAL else EXIT_SOLVER


def _cmd_evaluate(args) -> int:
    config = _require_config(args)
    ambiguity = amb.from_json(Path(args.ambiguity).read_text(encoding="utf-8"))
    x = np.array([float(v) for v in args.decision.split(",")])
    from .experiments import _newsvendor_method_config

    method_config: MethodConfig = _newsvendor_method_config(config)
    pieces = method_config.loss.at_decision(x)
    payload = {"decision": [float(v) for v in x]}
    if isinstance(ambiguity, (amb.BnwdroSet, amb.WdroSet)):
        program = fixed_decision_program(
            ambiguity, pieces, method_config.support, config.norm
        )
        result = solve_lp(program, config.solver)
        if result.status != OPTIMAL:
            sys.stderr.write(f"certificate solve ended with {result.status}\n")
            return EXIT_SOLVER
        payload["certificate"] = result.objective
    mean, stderr = monte_carlo_cost(
        x, method_config.loss, config.sampler, config.eval_samples, seed=config.seed
    )
    payload["out_of_sample_mean"] = mean
    payload["out_of_sample_stderr"] = stderr
    _write(args.out, json.dumps(payload, sort_keys=True), "evaluation.json")
    return EXIT_OK


def _cmd_experiment(args) -> int:
    config = _require_config(args)
    out_dir = args.out or config.out_dir
    report = run_experiment(config)
    emit_report(report, out_dir, config_echo={"seed": config.seed, "experiment": config.experiment})
    return EXIT_OK


def _cmd_export_mps(args) -> int:
    program = ProgramDescription.from_canonical_json(
        Path(args.program).read_text(encoding="utf-8")
    )
    out = args.out or (program.name + ".mps")
    export_mps(program, out)
    return EXIT_OK


_COMMANDS = {
    "cluster": _cmd_cluster,
    "calibrate": _cmd_calibrate,
    "build": _cmd_build,
    "solve": _cmd_solve,
    "evaluate": _cmd_evaluate,
    "experiment": _cmd_experiment,
    "export-mps": _cmd_export_mps,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_help()
        return EXIT_CONFIG
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return EXIT_CONFIG
    except RuntimeError as exc:
        sys.stderr.write(f"solver failure: {exc}\n")
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
