import json
from pathlib import Path

import numpy as np
import pytest

from drokit.errors import EmptyReport
from drokit.experiments import ComparisonReport
from drokit.report import emit_report, render_panel

GOLDEN_DIR = Path(__file__).parent / "data"


def two_point_report():
    rows = (
        {"method": "saa", "N": 10, "trial": 0, "certificate": 1.0,
         "out_of_sample": 1.25, "covered": False},
        {"method": "saa", "N": 10, "trial": 1, "certificate": 1.5,
         "out_of_sample": 1.25, "covered": True},
        {"method": "saa", "N": 20, "trial": 0, "certificate": 0.9,
         "out_of_sample": 1.1, "covered": False},
        {"method": "saa", "N": 20, "trial": 1, "certificate": 1.3,
         "out_of_sample": 1.05, "covered": True},
    )
    return ComparisonReport(
        experiment="newsvendor", methods=("saa",), n_list=(10, 20),
        rows=rows, reference=1.2,
    )


def test_emit_report_files(tmp_path):
    written = emit_report(two_point_report(), tmp_path, config_echo={"seed": 1})
    names = {p.name for p in written}
    assert "report.json" in names
    for metric in ("certificate", "out_of_sample", "reliability"):
        assert f"saa_{metric}.csv" in names
        assert f"{metric}.svg" in names


def test_report_json_recomputable_means(tmp_path):
    emit_report(two_point_report(), tmp_path)
    payload = json.loads((tmp_path / "report.json").read_text())
    trials = [r for r in payload["trials"] if r["method"] == "saa" and r["N"] == 10]
    recomputed = float(np.mean([r["certificate"] for r in trials]))
    summary = [s for s in payload["summary"] if s["method"] == "saa" and s["N"] == 10][0]
    assert abs(recomputed - summary["certificate"]["mean"]) <= 1e-12
    csv_lines = (tmp_path / "saa_certificate.csv").read_text().strip().splitlines()
    mean_from_csv = float(csv_lines[1].split(",")[1])
    assert abs(mean_from_csv - recomputed) <= 1e-12


def test_empty_report_refused(tmp_path):
    empty = ComparisonReport(
        experiment="newsvendor", methods=("saa",), n_list=(10,), rows=(), reference=None
    )
    with pytest.raises(EmptyReport):
        emit_report(empty, tmp_path)


def test_golden_svg():
    got = render_panel(two_point_report(), "certificate", "certificate")
    golden = (GOLDEN_DIR / "certificate_golden.svg").read_text()
    assert got == golden


def test_emit_deterministic(tmp_path):
    emit_report(two_point_report(), tmp_path / "a")
    emit_report(two_point_report(), tmp_path / "b")
    for name in ("report.json", "certificate.svg", "saa_certificate.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_summary_quantile_order():
    report = two_point_report()
    for s in report.summary():
        assert s["certificate"]["q10"] <= s["certificate"]["mean"] <= s["certificate"]["q90"]
        assert s["heavy_tail_warning"] is False
