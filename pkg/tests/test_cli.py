import json
import subprocess
import sys

import numpy as np
import pytest

from qtomo import io
from qtomo.cli import main

RUN = """\
[scheme]
name = jordan

[drive]
omega = 1
phi = 0.5*cos(0.9*t)

[grid]
state = -10 10 256
phase = -6 6 64
xi = -8 8 128
angles = 16

[state]
n = 1
theta = 0.3
time = 0.5

[evolution]
target = lambda
dt = 1e-2
t_end = 0.3
count = 64
checkpoint_every = 10
"""


@pytest.fixture
def config(tmp_path):
    path = tmp_path / "run.ini"
    path.write_text(RUN)
    return path


def _error(capsys):
    return json.loads(capsys.readouterr().err.strip().splitlines()[-1])


def test_scheme_moments(capsys):
    assert main(["scheme", "--name", "weyl", "--moments", "4"]) == 0
    assert capsys.readouterr().out.split() == ["1", "0.5", "0.25", "0.125", "0.0625"]
    assert main(["scheme", "--name", "jordan", "--moments", "1", "--G", "0"]) == 0
    assert capsys.readouterr().out.splitlines()[-1] == "G(0) = 1 +0i"


def test_scheme_from_config(config, capsys):
    assert main(["scheme", "--config", str(config), "--moments", "2"]) == 0
    assert capsys.readouterr().out.split() == ["1", "0.5", "0.5"]


def test_usage_errors(capsys):
    assert main(["scheme"]) == 2
    assert _error(capsys)["error"] == "usage"
    assert main(["frobnicate"]) == 2
    assert main(["validate", "--suite", "nothing"]) == 2


def test_missing_phi_is_a_config_error(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[drive]\nomega = 1\n")
    assert main(["states", "--config", str(path), "--output", str(tmp_path / "o")]) == 2
    record = _error(capsys)
    assert record == {"error": "config", "message": "drive.phi: required", "exit": 2}


def test_bad_expression_and_omega_start(tmp_path, capsys):
    path = tmp_path / "bad.ini"
    path.write_text("[drive]\nomega = 1 +\nphi = 0\n")
    assert main(["wigner", "--config", str(path)]) == 2
    assert "offset" in _error(capsys)["message"]
    path.write_text("[drive]\nomega = 2\nphi = 0\n")
    assert main(["wigner", "--config", str(path)]) == 2
    assert "Omega(0)" in _error(capsys)["message"]


def test_states_and_wigner(config, tmp_path):
    out = tmp_path / "out"
    assert main(["states", "--config", str(config), "--output", str(out)]) == 0
    assert {"trajectory.csv", "psi_1.csv", "rho.qtg", "manifest.json"} <= {p.name for p in out.iterdir()}
    assert main(["wigner", "--config", str(config), "--output", str(out)]) == 0
    values, axes = io.read_grid(out / "wigner.qtg")
    assert values.shape == (64, 64)
    assert abs(values.sum() * axes[0].spacing * axes[1].spacing - 1) <= 1e-6
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["command"] == "wigner"
    assert manifest["sign_convention"] == "+-++"
    assert set(manifest["outputs"]) == {"wigner.qtg", "wigner.csv", "wigner.dat", "lambda.qtg"}


def test_tomogram_command(config, tmp_path):
    out = tmp_path / "out"
    assert main(["tomogram", "--config", str(config), "--output", str(out)]) == 0
    values, axes = io.read_grid(out / "tomogram.qtg")
    assert values.shape == (16, 128)
    assert np.abs(values.sum(axis=1) * axes[1].spacing - 1).max() <= 1e-6


def test_evolve_and_rerun_from_manifest(config, tmp_path):
    first = tmp_path / "a"
    assert main(["evolve", "--config", str(config), "--output", str(first)]) == 0
    names = {p.name for p in first.glob("*.qtg")}
    assert names == {"lambda_node00.qtg", "wigner_final.qtg",
                     "checkpoint_node00_000010.qtg", "checkpoint_node00_000020.qtg"}
    second = tmp_path / "b"
    assert main(["evolve", "--config", str(first / "manifest.json"), "--output", str(second)]) == 0
    for name in names:
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_evolve_family(config, tmp_path):
    path = tmp_path / "family.ini"
    path.write_text(RUN.replace("target = lambda", "target = family").replace("checkpoint_every = 10", ""))
    out = tmp_path / "out"
    assert main(["evolve", "--config", str(path), "--output", str(out), "--threads", "2"]) == 0
    assert {"lambda_node00.qtg", "lambda_node01.qtg", "wigner_full.qtg", "correction.qtg"} <= {
        p.name for p in out.iterdir()}


def test_evolve_needs_theta(tmp_path, capsys):
    path = tmp_path / "run.ini"
    path.write_text(RUN.replace("theta = 0.3\n", ""))
    assert main(["evolve", "--config", str(path), "--output", str(tmp_path / "o")]) == 2
    assert "state.theta" in _error(capsys)["message"]


def test_numerical_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "run.ini"
    path.write_text(RUN.replace("dt = 1e-2", "dt = 0.3").replace("t_end = 0.3", "t_end = 0.6"))
    assert main(["evolve", "--config", str(path), "--output", str(tmp_path / "o")]) == 1
    assert _error(capsys)["error"] == "numerical"


def test_environment_output(config, tmp_path, monkeypatch):
    monkeypatch.setenv("QTOMO_OUTPUT", str(tmp_path / "env"))
    assert main(["states", "--config", str(config)]) == 0
    assert (tmp_path / "env" / "rho.qtg").exists()


def test_validate_closed_forms(tmp_path, capsys):
    report = tmp_path / "report.json"
    assert main(["validate", "--suite", "closed-forms", "--report", str(report)]) == 0
    assert "criteria passed" in capsys.readouterr().out
    assert all(r["passed"] for r in json.loads(report.read_text()))


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "qtomo.cli", "scheme", "--name", "point(0.25)", "--moments", "2"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout.split() == ["1", "0.25", "0.0625"]
