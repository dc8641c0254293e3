import asyncio

import pytest

import main
from database import RunLedger
from xlmimo.results import read_csv

SMALL_RUN = """
name: tiny-snr
experiment: snr_vs_M
carrier_frequency: 2.4e9
seed: 1
params:
  r: 15.0
  transmit_snr_db: 90
sweep:
  parameter: num_elements
  min: 2
  max: 8
  steps: 3
  scale: log
"""


@pytest.fixture(autouse=True)
def private_ledger(tmp_path, monkeypatch):
    ledger = RunLedger(str(tmp_path / "runs.db"))
    monkeypatch.setattr(main, "ledger", ledger)
    monkeypatch.setattr(main.runner, "ledger", ledger)
    return ledger


def write(tmp_path, text, name="scenario.yaml"):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


def cli(*argv):
    return asyncio.run(main.main(list(argv)))


def test_run_writes_csv_and_history(tmp_path, capsys):
    config = write(tmp_path, SMALL_RUN)
    assert cli("run", config, "--out", str(tmp_path / "out"), "--seed", "9") == main.EXIT_OK
    path = tmp_path / "out" / "snr_vs_M.csv"
    meta, header, rows = read_csv(path)
    assert meta["seed"] == "9"
    assert header[0] == "num_elements"
    assert [row[0] for row in rows] == ["2", "4", "8"]
    assert str(path) in capsys.readouterr().out

    assert cli("history", "--limit", "5") == main.EXIT_OK
    out = capsys.readouterr().out
    assert "snr_vs_M (tiny-snr) seed=9 rows=3" in out


def test_validate_exit_codes(tmp_path, capsys):
    assert cli("validate", write(tmp_path, SMALL_RUN)) == main.EXIT_OK
    broken = SMALL_RUN.replace("carrier_frequency: 2.4e9", "carrier_frequency: -2.4e9")
    assert cli("validate", write(tmp_path, broken, "broken.yaml")) == main.EXIT_INVALID
    assert "error: carrier_frequency: must be a positive number" in capsys.readouterr().out


def test_run_rejects_invalid_scenario(tmp_path, capsys):
    broken = SMALL_RUN.replace("experiment: snr_vs_M", "experiment: no_such_thing")
    assert cli("run", write(tmp_path, broken)) == main.EXIT_INVALID
    assert "error: experiment: unknown experiment 'no_such_thing'" in capsys.readouterr().out


def test_numerical_failure_is_a_runtime_error(tmp_path):
    end_fire = SMALL_RUN.replace("r: 15.0", "r: 15.0\n  theta: 0.0")
    assert cli("run", write(tmp_path, end_fire), "--out", str(tmp_path)) == main.EXIT_RUNTIME


def test_list_experiments(capsys):
    assert cli("list-experiments") == main.EXIT_OK
    out = capsys.readouterr().out
    assert "training_compare" in out
    assert "dam_isi_vs_M" in out


def test_export_codebook(tmp_path, scenario_dir):
    assert cli("export-codebook", str(scenario_dir / "training_compare.yaml"),
               "--out", str(tmp_path)) == main.EXIT_OK
    _, header, rows = read_csv(tmp_path / "training-compare_codebook.csv")
    assert header[:4] == ["n", "s", "angle", "distance"]
    assert len(header) == 4 + 2 * 256
    assert sum(1 for row in rows if row[1] == "0") == 256


def test_missing_layout_is_a_validation_error(tmp_path, capsys):
    no_array = """
name: no-array
experiment: training_compare
carrier_frequency: 28.0e9
params:
  transmit_snr_db: 100
  episodes: 1
"""
    path = write(tmp_path, no_array)
    assert cli("validate", path) == main.EXIT_INVALID
    assert cli("run", path, "--out", str(tmp_path)) == main.EXIT_INVALID
    assert "error: layout: missing (required by training_compare)" in capsys.readouterr().out


def test_export_codebook_needs_a_layout(tmp_path, capsys):
    assert cli("export-codebook", write(tmp_path, SMALL_RUN), "--out", str(tmp_path)) == main.EXIT_INVALID
    assert "error: layout: missing (required by export-codebook)" in capsys.readouterr().out
