import json
from pathlib import Path

import numpy as np
import pytest

from drokit.cli import EXIT_CONFIG, EXIT_OK, main
from drokit.dataset import Dataset, save_csv, sample_mixture, scalar_mixture

BIMODAL = scalar_mixture([(0.5, -5.0, 1.0), (0.5, 5.0, 1.0)])

CONFIG = """
experiment = "newsvendor"
seed = 4
beta = 0.95
n_list = [12]
trials = 2
eval_samples = 400

[sampler]
seed = 0
components = [
  {{ weight = 0.5, mean = [-5.0], cov = [[1.0]] }},
  {{ weight = 0.5, mean = [5.0], cov = [[1.0]] }},
]

[newsvendor]
holding_cost = 1.0
backlog_cost = 2.0
support = [-10.0, 10.0]

[dpmm]
truncation = 5
seed = 0
{extra}
"""


@pytest.fixture()
def workdir(tmp_path):
    cfg = tmp_path / "run.toml"
    cfg.write_text(CONFIG.format(extra=""))
    data = sample_mixture(BIMODAL, 40, seed=2)
    csv = tmp_path / "data.csv"
    save_csv(data, csv)
    return tmp_path, cfg, csv


def test_cluster_command(workdir):
    tmp, cfg, csv = workdir
    out = tmp / "clustering.json"
    code = main(["--config", str(cfg), "cluster", "--data", str(csv), "--out", str(out)])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert len(payload["labels"]) == 40
    assert abs(sum(payload["weights"]) - 1.0) < 1e-12


def test_calibrate_command(workdir):
    tmp, cfg, csv = workdir
    clustering = tmp / "clustering.json"
    main(["--config", str(cfg), "cluster", "--data", str(csv), "--out", str(clustering)])
    out = tmp / "radii.json"
    code = main([
        "--config", str(cfg), "calibrate", "--data", str(csv),
        "--clustering", str(clustering), "--out", str(out),
    ])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["beta"] == 0.95
    assert all(r > 0 for r in payload["radii"])


def test_build_and_evaluate(workdir):
    tmp, cfg, csv = workdir
    out = tmp / "set.json"
    code = main(["--config", str(cfg), "build", "--data", str(csv), "--kind", "bnwdro", "--out", str(out)])
    assert code == EXIT_OK
    assert json.loads(out.read_text())["kind"] == "bnwdro"

    ev = tmp / "eval.json"
    code = main([
        "--config", str(cfg), "evaluate", "--set", str(out), "--decision", "4.0",
        "--out", str(ev),
    ])
    assert code == EXIT_OK
    payload = json.loads(ev.read_text())
    assert payload["certificate"] >= 0
    assert payload["out_of_sample_mean"] > 0


def test_solve_and_export_mps(workdir, tmp_path):
    tmp, cfg, csv = workdir
    from drokit.program import GE, LE, ProgramBuilder

    builder = ProgramBuilder(name="toy")
    x = builder.add_variable("x", objective=1.0)
    builder.add_constraint([(x, 1.0)], GE, 1.0, name="lo")
    builder.add_constraint([(x, 1.0)], LE, 5.0, name="hi")
    prog_path = tmp / "prog.json"
    prog_path.write_text(builder.build().to_canonical_json())

    out = tmp / "result.json"
    code = main(["solve", "--program", str(prog_path), "--out", str(out)])
    assert code == EXIT_OK
    payload = json.loads(out.read_text())
    assert payload["status"] == "Optimal"
    assert abs(payload["objective"] - 1.0) < 1e-9

    mps = tmp / "toy.mps"
    code = main(["export-mps", "--program", str(prog_path), "--out", str(mps)])
    assert code == EXIT_OK
    assert mps.read_text().startswith("* META")


def test_experiment_command_and_determinism(workdir):
    tmp, cfg, csv = workdir
    out1 = tmp / "run1"
    out2 = tmp / "run2"
    assert main(["--config", str(cfg), "experiment", "--out", str(out1)]) == EXIT_OK
    assert main(["--config", str(cfg), "experiment", "--out", str(out2)]) == EXIT_OK
    assert (out1 / "report.json").read_bytes() == (out2 / "report.json").read_bytes()


def test_missing_config_is_exit_2(workdir):
    tmp, cfg, csv = workdir
    assert main(["cluster", "--data", str(csv)]) == EXIT_CONFIG
    assert main(["--config", str(tmp / "nope.toml"), "cluster", "--data", str(csv)]) == EXIT_CONFIG


def test_bad_config_is_exit_2(workdir):
    tmp, cfg, csv = workdir
    bad = tmp / "bad.toml"
    bad.write_text("experiment = 3")
    assert main(["--config", str(bad), "cluster", "--data", str(csv)]) == EXIT_CONFIG


def test_no_command_prints_help(capsys):
    assert main([]) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().out.lower()


def test_solve_infeasible_is_exit_3(workdir):
    tmp, cfg, csv = workdir
    from drokit.program import GE, LE, ProgramBuilder

    builder = ProgramBuilder(name="bad")
    x = builder.add_variable("x", objective=1.0)
    builder.add_constraint([(x, 1.0)], GE, 2.0, name="a")
    builder.add_constraint([(x, 1.0)], LE, 1.0, name="b")
    path = tmp / "bad.json"
    path.write_text(builder.build().to_canonical_json())
    assert main(["solve", "--program", str(path), "--out", str(tmp / "r.json")]) == 3
