"""End-to-end runs of the commands through CommandRunner and main."""

import json
import math

import pytest
from rich.console import Console

from vibracav.commands import CommandRunner
from vibracav.config import RangeSpec, SweepRequest
from vibracav.main import main


@pytest.fixture
def runner():
    return CommandRunner(console=Console(quiet=True))


@pytest.fixture(autouse=True)
def clean_env(monkeypatch):
    for name in ("VIBRACAV_TOL", "VIBRACAV_FORMAT", "VIBRACAV_MAX_M"):
        monkeypatch.delenv(name, raising=False)


def test_figure1_starts_at_vacuum(runner):
    result = runner.run(SweepRequest(command="figure1"))
    frame = result.frame
    assert len(frame) == 100
    first = frame.iloc[0]
    assert (first["kappa"], first["u1"], first["v1"], first["chi1"], first["N1"], first["Q1"]) == \
        (0.0, 0.5, 0.5, 1.0, 0.0, 1.0)
    assert frame["u1"].is_monotonic_decreasing
    assert frame["v1"].is_monotonic_increasing
    assert frame["u1"].iloc[-1] > 2.0 / math.pi ** 2


def test_figure2_cavity_is_flatter_than_planck(runner):
    result = runner.run(SweepRequest(command="figure2"))
    diagnostics = result.diagnostics
    assert diagnostics["mass_cavity"] == pytest.approx(1.0, abs=1e-4)
    assert diagnostics["n_bar_cavity"] == pytest.approx(diagnostics["n_bar_planck"], rel=5e-3)
    assert diagnostics["splash_n2"] > 0
    assert diagnostics["ratio_increasing_20_60"] is True
    assert list(result.frame.columns) == ["n", "f_cavity", "f_planck", "ratio"]


def test_audit_passes_inside_reach(runner):
    result = runner.run(SweepRequest(command="audit", tau_grid=RangeSpec(0.0, 1.0, 2)))
    assert result.passed
    assert result.frame["passed"].tolist() == [True, True]
    assert result.frame["unitarity"].max() < 1e-8
    assert result.frame["oracle"].max() < 1e-7


def test_audit_reports_narrow_table(runner):
    result = runner.run(SweepRequest(command="audit", tau=3.0, max_m=2))
    assert not result.passed
    assert result.frame["passed"].tolist() == [False]
    assert "error" in result.diagnostics["tau=3.0"]
    assert result.diagnostics["tau=3.0"]["tail_bound"] > 0.0
    assert result.frame["tail_bound"].iloc[0] > 0.0


def test_audit_passes_at_long_time(runner):
    result = runner.run(SweepRequest(command="audit", tau=2.0))
    assert result.passed, result.diagnostics
    details = result.diagnostics["tau=2.0"]
    assert details["cutoff"] <= 100_000
    assert details["oracle_modes"] >= 100
    assert result.frame["recurrence"].iloc[0] < 1e-6


def test_variances_include_closed_rows(runner):
    result = runner.run(SweepRequest(command="variances", tau=0.5, modes=[1, 3]))
    frame = result.frame
    assert sorted(frame["source"].unique()) == ["closed", "series"]
    for mode in (1, 3):
        rows = frame[frame["mode"] == mode]
        assert rows["U"].iloc[0] == pytest.approx(rows["U"].iloc[1], abs=1e-8)


def test_pdf_command_is_normalized(runner):
    result = runner.run(SweepRequest(command="pdf", tau=1.0, modes=[1]))
    key = "tau=1.0"
    assert result.diagnostics[key]["mass"] == pytest.approx(1.0, abs=1e-6)
    assert result.frame["f_planck"].sum() == pytest.approx(1.0, abs=1e-6)


def test_coeffs_respect_nmax(runner):
    result = runner.run(SweepRequest(command="coeffs", tau=0.5, max_m=3, n_max=4))
    assert result.frame["n"].max() == 4
    assert set(result.frame["m"]) <= set(range(-3, 4))


def test_csv_output_is_byte_stable(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    first, second = tmp_path / "first.csv", tmp_path / "second.csv"
    argv = ["vibracav", "figure1", "--kappa-range", "0:0.5:6"]
    assert main(argv + ["--out", str(first)], exit_fn=lambda code: None) == 0
    assert main(argv + ["--out", str(second)], exit_fn=lambda code: None) == 0
    assert first.read_bytes() == second.read_bytes()
    lines = first.read_text().splitlines()
    assert "# command: figure1" in lines
    assert "kappa,u1,v1,chi1,N1,Q1" in lines


def test_json_output_carries_diagnostics(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    target = tmp_path / "audit.json"
    code = main(["vibracav", "audit", "--tau", "3", "--max-m", "2", "--format", "json", "--out", str(target)],
                exit_fn=lambda code: None)
    assert code == 1
    payload = json.loads(target.read_text())
    assert payload["request"]["command"] == "audit"
    assert payload["rows"][0]["passed"] is False
    assert payload["rows"][0]["oracle"] is None
    assert payload["rows"][0]["tail_bound"] > 0.0
    assert "tolerances" in payload["diagnostics"]
