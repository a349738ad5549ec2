import re
import struct

import numpy as np
import pytest

from qtomo import io
from qtomo.config import ConfigError, parse_config
from qtomo.grids import GridSpec, PhaseGrid
from qtomo.oscillator import DEFAULT_GRID, density_matrix, undriven
from qtomo.phasespace import WignerField, partial_wigner
from qtomo.tomography import default_angles, radon_tomogram

BASE = """\
[drive]
omega = 1
phi = 0.5*cos(0.9*t)
"""


def _field():
    grid = PhaseGrid.square(6.0, 64)
    return partial_wigner(density_matrix(undriven(1.0, samples=2), 1, 0), 0.3, grid)


def test_qtg_round_trip_is_bit_identical(tmp_path):
    W = _field()
    path = io.save_field(tmp_path / "w.qtg", W)
    values, axes = io.read_grid(path)
    assert values.tobytes() == np.ascontiguousarray(W.values, dtype=complex).tobytes()
    assert axes == [W.grid.q, W.grid.p]
    again = io.save_field(tmp_path / "w2.qtg", io.load_wigner(path, 0.3))
    assert again.read_bytes() == path.read_bytes()


def test_qtg_header(tmp_path):
    axis = GridSpec(-1.0, 1.0, 8)
    path = io.write_grid(tmp_path / "v.qtg", np.arange(8) + 0.5j, [axis])
    data = path.read_bytes()
    assert data[:4] == b"QTG1"
    assert struct.unpack_from("<III", data, 4) == (1, 1, 8)
    assert struct.unpack_from("<dd", data, 16) == (-1.0, 1.0)
    assert len(data) == 32 + 16 * 8


def test_qtg_rejects_bad_files(tmp_path):
    bad = tmp_path / "bad.qtg"
    bad.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(io.FormatError):
        io.read_grid(bad)
    axis = GridSpec(-1.0, 1.0, 8)
    path = io.write_grid(tmp_path / "v.qtg", np.zeros(8), [axis])
    path.write_bytes(path.read_bytes()[:-3])
    with pytest.raises(io.FormatError):
        io.read_grid(path)
    with pytest.raises(ValueError):
        io.write_grid(tmp_path / "x.qtg", np.zeros((8, 4)), [axis, axis])


def test_csv_round_trip(tmp_path):
    W = _field()
    path = io.field_csv(tmp_path / "w.csv", W)
    header = path.read_text().splitlines()[0]
    assert header == "q,p,re,im"
    table = np.loadtxt(path, delimiter=",", skiprows=1)
    assert np.array_equal(table[:, 2] + 1j * table[:, 3], W.values.ravel())

    traj = undriven(2.0, samples=21)
    table = np.loadtxt(io.trajectory_csv(tmp_path / "t.csv", traj), delimiter=",", skiprows=1)
    assert np.array_equal(table[:, 0], traj.times)


def test_tomogram_and_wavefunction_csv(tmp_path):
    W = _field()
    f = radon_tomogram(W, GridSpec(-8.0, 8.0, 64), default_angles(4))
    table = np.loadtxt(io.tomogram_csv(tmp_path / "f.csv", f), delimiter=",", skiprows=1)
    assert table.shape == (4 * 64, 4)
    assert np.array_equal(table[:, 2] + 1j * table[:, 3], f.values.ravel())
    psi = np.exp(-DEFAULT_GRID.points**2 / 2) * (1 + 0.5j)
    table = np.loadtxt(io.wavefunction_csv(tmp_path / "psi.csv", DEFAULT_GRID, psi), delimiter=",", skiprows=1)
    assert np.array_equal(table[:, 1] + 1j * table[:, 2], psi)


def test_gnuplot_blocks(tmp_path):
    W = WignerField(PhaseGrid.square(1.0, 8), np.ones((8, 8), dtype=complex), 0.5)
    lines = io.gnuplot_blocks(tmp_path / "w.dat", W).read_text().split("\n")
    assert lines[8] == ""
    assert len(lines[0].split()) == 3


def test_minimal_config_defaults():
    cfg = parse_config(BASE, env={})
    assert cfg.scheme.label == "weyl"
    assert cfg.target == "lambda"
    assert cfg.theta is None
    assert cfg.dt == 1e-3


def test_config_round_trip():
    text = BASE + """
[scheme]
atom = [0.0, 0.25]
atom = [1.0, 0.25]
density = uniform

[state]
n = 2
theta = 0.3

[evolution]
target = family
dt = 5e-3
t_end = 2
"""
    cfg = parse_config(text, env={})
    assert len(cfg.scheme.nodes) > 2
    assert parse_config(cfg.to_ini(), env={}) == cfg


@pytest.mark.parametrize(
    "text, message",
    [
        ("[drive]\nomega = 1\n", "drive.phi: required"),
        ("[drive]\nomega = 1 + 0.1*cos(t)\nphi = 0\n", "Omega(0) must equal 1"),
        ("[drive]\nomega = 1\nphi = cos(\n", "offset"),
        (BASE + "[state]\ntheta = 1.5\n", "outside [0, 1]"),
        (BASE + "[evolution]\ntarget = wigner\n", "evolution.target"),
        (BASE + "[evolution]\ncount = 100\n", "power of two"),
        (BASE + "[colour]\nred = 1\n", "unknown section"),
        (BASE + "[state]\nspin = 1\n", "unknown key"),
        (BASE + "[scheme]\natom = 0.5\n", "scheme"),
    ],
)
def test_config_errors(text, message):
    with pytest.raises(ConfigError, match=re.escape(message)):
        parse_config(text, env={})


def test_environment_overrides():
    cfg = parse_config(BASE + "[run]\noutput = a\nthreads = 3\n", env={"QTOMO_OUTPUT": "b", "QTOMO_THREADS": "2"})
    assert str(cfg.output) == "b"
    assert cfg.threads == 2
    with pytest.raises(ConfigError):
        parse_config(BASE, env={"QTOMO_THREADS": "many"})
