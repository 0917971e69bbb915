import json

import pandas as pd
import pytest

from vibracav import __version__
from vibracav.errors import InputError
from vibracav.exporters import print_table, render_csv, render_json, write_table


def _frame():
    return pd.DataFrame({"kappa": [0.0, 0.1], "u1": [0.5, 0.1 / 3.0]})


REQUEST = {"command": "figure1", "p": 2, "gamma": 0.0, "tau": None}


def test_csv_header_echoes_request_sorted():
    text = render_csv(_frame(), REQUEST)
    lines = text.splitlines()

    assert lines[:5] == ["# command: figure1", "# gamma: 0.0", "# p: 2", "# tau: None",
                         f"# version: {__version__}"]
    assert lines[5] == "kappa,u1"
    # 17 significant digits round-trip the value
    assert float(lines[7].split(",")[1]) == 0.1 / 3.0


def test_json_payload_layout():
    payload = json.loads(render_json(_frame(), REQUEST, {"tail": 1e-13}))

    assert set(payload) == {"request", "rows", "diagnostics"}
    assert payload["request"]["version"] == __version__
    assert payload["rows"][1]["u1"] == 0.1 / 3.0
    assert payload["diagnostics"] == {"tail": 1e-13}


def test_write_table_is_byte_stable(tmp_path):
    first = write_table(_frame(), REQUEST, {}, tmp_path / "a.csv", "csv")
    second = write_table(_frame(), REQUEST, {}, tmp_path / "b.csv", "csv")

    assert first.read_bytes() == second.read_bytes()
    assert b"\r\n" not in first.read_bytes()


def test_write_table_reports_path_on_failure(tmp_path):
    target = tmp_path / "missing" / "out.json"
    with pytest.raises(InputError) as excinfo:
        write_table(_frame(), REQUEST, {}, target, "json")
    assert excinfo.value.diagnostics["path"] == str(target)


def test_write_table_rejects_unknown_format(tmp_path):
    with pytest.raises(InputError):
        write_table(_frame(), REQUEST, {}, tmp_path / "out.xml", "xml")


def test_print_table_renders_rows():
    from rich.console import Console

    console = Console(record=True, width=120)
    print_table(_frame(), "figure1", console=console, diagnostics={"p": 2})
    output = console.export_text()

    assert "figure1" in output
    assert "0.03333333333" in output
    assert "p: 2" in output


def test_json_writes_non_finite_values_as_null():
    frame = pd.DataFrame({"tau": [3.0], "unitarity": [float("nan")], "passed": [False]})
    text = render_json(frame, REQUEST, {"tau=3.0": {"tail_bound": float("inf"), "error": "cutoff"}})

    assert "NaN" not in text and "Infinity" not in text
    payload = json.loads(text)
    assert payload["rows"][0]["unitarity"] is None
    assert payload["rows"][0]["passed"] is False
    assert payload["diagnostics"]["tau=3.0"]["tail_bound"] is None
