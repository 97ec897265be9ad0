from __future__ import annotations

import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from cplab import cli

SMOKE = [
    ["subset-comm", "--trials", "3", "--set-size", "50", "--subset-size", "5"],
    ["multiphase-reduce", "--trials", "4"],
    ["multiphase-reduce", "--trials", "2", "--ds", "lookup", "--k", "3", "--n", "6", "--ell", "3"],
    ["omv-roundtrip", "--trials", "1"],
    ["dyn-roundtrip", "--trials", "2"],
    ["dyn-roundtrip", "--trials", "1", "--gamma", "shared"],
    ["wellspread", "--trials", "5"],
    ["ranksum-count"],
]


@pytest.fixture(autouse=True)
def no_env_seed(monkeypatch):
    monkeypatch.delenv("CPLAB_SEED", raising=False)


@pytest.mark.parametrize("argv", SMOKE, ids=lambda a: " ".join(a))
def test_reports_validate_and_exit_zero(argv):
    code, text = cli.run_experiment(argv)
    assert code == 0, text
    report = json.loads(text)
    jsonschema.validate(report, cli.load_schema())
    assert report["violations"] == []
    for row in report["trials"]:
        if "breakdown" in row:
            measured = row.get("measured_bits", row.get("bits_measured"))
            assert measured == sum(row["breakdown"].values())


@pytest.mark.parametrize("argv", SMOKE[:5], ids=lambda a: " ".join(a))
def test_same_seed_same_bytes(argv):
    assert cli.run_experiment(argv + ["--seed", "3"]) == cli.run_experiment(argv + ["--seed", "3"])


def test_seed_changes_output():
    a = cli.run_experiment(["subset-comm", "--trials", "2", "--seed", "1"])[1]
    b = cli.run_experiment(["subset-comm", "--trials", "2", "--seed", "2"])[1]
    assert a != b


def test_env_seed_overrides(monkeypatch):
    plain = cli.run_experiment(["subset-comm", "--trials", "2", "--seed", "9"])[1]
    monkeypatch.setenv("CPLAB_SEED", "9")
    code, text = cli.run_experiment(["subset-comm", "--trials", "2", "--seed", "1"])
    assert code == 0 and text == plain
    monkeypatch.setenv("CPLAB_SEED", "x")
    assert cli.run_experiment(["subset-comm"])[0] == 2


@pytest.mark.parametrize(
    "argv,hint",
    [
        (["wellspread", "--n", "5"], "try 6"),
        (["omv-roundtrip", "--n", "12"], "nearest valid n: 8"),
        (["multiphase-reduce", "--n", "4", "--ell", "3"], "nearest valid n"),
        (["dyn-roundtrip", "--n", "4", "--beta", "4", "--ell", "2"], "valid (n, beta, l)"),
        (["subset-comm", "--set-size", "10", "--subset-size", "11"], "try 10"),
        (["subset-comm", "--universe-bits", "3", "--set-size", "9"], "try 8"),
    ],
)
def test_invalid_parameters_exit_2(argv, hint):
    code, text = cli.run_experiment(argv)
    assert code == 2 and hint in text


def test_csv_output():
    code, text = cli.run_experiment(["--format", "csv", "subset-comm", "--trials", "3"])
    rows = list(csv.DictReader(io.StringIO(text)))
    assert code == 0 and len(rows) == 3
    assert {"alice_bits", "bob_bits", "correct", "trial"} <= set(rows[0])
    code, text = cli.run_experiment(["--format", "csv", "dyn-roundtrip", "--trials", "1"])
    assert "breakdown.products" in text.splitlines()[0]


def test_output_file(tmp_path):
    out = tmp_path / "r.json"
    assert cli.main(["--output", str(out), "wellspread", "--trials", "3"]) == 0
    jsonschema.validate(json.loads(out.read_text()), cli.load_schema())


def test_console_entry_point():
    proc = subprocess.run(
        [sys.executable, "-m", "cplab.cli", "wellspread", "--n", "3"], capture_output=True, text=True
    )
    assert proc.returncode == 2 and "even" in proc.stderr
    proc = subprocess.run(
        [sys.executable, "-m", "cplab.cli", "subset-comm", "--trials", "1"], capture_output=True, text=True
    )
    assert proc.returncode == 0 and json.loads(proc.stdout)["schema_version"] == 1


def test_violation_exits_1(monkeypatch):
    from cplab import subset_comm

    real = subset_comm.run_protocol

    def broken(A, B, w, seed=0, transcript=None):
        got, t = real(A, B, w, seed, transcript)
        return frozenset(), t

    monkeypatch.setattr(subset_comm, "run_protocol", broken)
    code, text = cli.run_experiment(["subset-comm", "--trials", "2"])
    assert code == 1 and json.loads(text)["violations"]
