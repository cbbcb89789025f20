from __future__ import annotations

import csv
import json
import subprocess
import sys

import pytest

from leaktree.cli import main

from conftest import SCENARIOS

PIPE = str(SCENARIOS / "single_pipe.toml")
REVERSED = str(SCENARIOS / "single_pipe_reversed.toml")
DISTRICT = str(SCENARIOS / "branched.toml")
NO_LEAK = str(SCENARIOS / "no_leak.toml")


def rows(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate(capsys):
    assert main(["validate", "--scenario", DISTRICT]) == 0
    assert "7 vertices" in capsys.readouterr().out


def test_simulate_then_localize(tmp_path, capsys):
    meas = tmp_path / "m.csv"
    assert main(["simulate", "--scenario", DISTRICT, "--out", str(meas)]) == 0
    assert len(rows(meas)) == 8  # 4 leaves x 2 snapshots
    state = json.loads(meas.with_suffix(".state.json").read_text())
    assert state[0]["leak"]["pipe"] == 4 and state[1]["source_head"] == 70.0

    out = tmp_path / "r.json"
    assert main(["localize", "--scenario", DISTRICT, "--measurements", str(meas), "--out", str(out)]) == 0
    result = json.loads(out.read_text())
    assert result["pipe"] == 4
    assert result["ci_low"] <= result["x"] <= result["ci_high"]
    assert result["beta"] > 0 and result["constant"] > 0
    assert "leak on pipe 4" in capsys.readouterr().err

    assert main(["localize", "--scenario", DISTRICT, "--measurements", str(meas), "--format", "csv",
                 "--out", str(tmp_path / "r.csv")]) == 0
    assert rows(tmp_path / "r.csv")[0]["pipe"] == "4"


def test_simulate_is_byte_identical(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for path in (a, b):
        assert main(["simulate", "--scenario", PIPE, "--out", str(path), "--seed", "9"]) == 0
    assert a.read_bytes() == b.read_bytes()
    main(["simulate", "--scenario", PIPE, "--out", str(tmp_path / "c.csv"), "--seed", "10"])
    assert (tmp_path / "c.csv").read_bytes() != a.read_bytes()


def test_noise_is_byte_identical(tmp_path):
    args = ["noise", "--scenario", PIPE, "--trials", "40", "--levels", "1,4,16", "--seed", "5"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(a)]) == 0
    assert main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    table = rows(a)
    assert [r["n"] for r in table] == ["1", "4", "16"]
    assert set(table[0]) == {"n", "mse", "predicted", "coverage", "bias", "variance", "trials"}


def test_noise_json(capsys):
    assert main(["noise", "--scenario", PIPE, "--trials", "10", "--levels", "2", "--format", "json"]) == 0
    (row,) = json.loads(capsys.readouterr().out)
    assert row["n"] == 2 and row["trials"] == 10


def test_sweep_of_main_pipe(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--scenario", PIPE, "--step", "100", "--out", str(out)]) == 0
    table = rows(out)
    assert [float(r["true_x"]) for r in table] == [100.0 * k for k in range(11)]
    assert max(float(r["abs_error"]) for r in table) <= 0.1
    assert [r["junction_proximate"] for r in table] == ["1"] + ["0"] * 9 + ["1"]


@pytest.mark.parametrize("scenario", [PIPE, REVERSED])
def test_sweep_with_step_equal_to_length(tmp_path, scenario):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--scenario", scenario, "--step", "1000", "--out", str(out)]) == 0
    table = rows(out)
    assert len(table) == 2 and all(r["junction_proximate"] == "1" for r in table)
    assert all(float(r["abs_error"]) <= 0.1 for r in table)


def test_reversed_sweep_round_trips(tmp_path):
    out = tmp_path / "s.csv"
    assert main(["sweep", "--scenario", REVERSED, "--step", "250", "--out", str(out)]) == 0
    assert max(float(r["abs_error"]) for r in rows(out)) <= 0.1


def test_no_leak_exit_code(tmp_path, capsys):
    meas = tmp_path / "m.csv"
    assert main(["simulate", "--scenario", NO_LEAK, "--out", str(meas)]) == 0
    assert main(["localize", "--scenario", NO_LEAK, "--measurements", str(meas)]) == 3
    assert "no leak detected" in capsys.readouterr().err


def test_infeasible_model_exit_code(tmp_path, capsys):
    text = (SCENARIOS / "single_pipe.toml").read_text().replace("flow = -0.05", "flow = -0.9")
    path = tmp_path / "dry.toml"
    path.write_text(text)
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "m.csv")]) == 2
    assert "InfeasiblePressureError" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["bogus"],
        ["sweep", "--scenario", PIPE],
        ["sweep", "--scenario", PIPE, "--step", "-5"],
        ["sweep", "--scenario", DISTRICT, "--step", "5"],
        ["simulate", "--scenario", PIPE],
        ["validate", "--scenario", str(SCENARIOS / "missing.toml")],
        ["noise", "--scenario", REVERSED, "--seed", "1"],
        ["localize", "--scenario", PIPE, "--measurements", "/nonexistent.csv"],
    ],
)
def test_usage_errors(argv, capsys):
    assert main(argv) == 1


def test_randomized_commands_need_a_seed(tmp_path):
    text = (SCENARIOS / "single_pipe.toml").read_text().replace("seed = 2024\n", "")
    path = tmp_path / "noseed.toml"
    path.write_text(text)
    assert main(["noise", "--scenario", str(path), "--trials", "2", "--levels", "1"]) == 1
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "m.csv")]) == 1
    assert main(["noise", "--scenario", str(path), "--trials", "2", "--levels", "1", "--seed", "1"]) == 0


def test_bad_measurement_file(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("snapshot,leaf,head,flow,sigma_head,sigma_flow\n0,0,abc,1,,\n")
    assert main(["localize", "--scenario", PIPE, "--measurements", str(bad)]) == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "leaktree", "validate", "--scenario", PIPE],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and proc.stdout.startswith("ok")
