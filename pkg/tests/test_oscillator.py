import math

import numpy as np
import pytest

from qtomo.expr import parse_time_expression
from qtomo.oscillator import (
    DEFAULT_GRID,
    DensityMatrix,
    DriveSpec,
    StateError,
    density_matrix,
    excited_state,
    ground_state,
    hamiltonian_apply,
    integrate_trajectory,
    lowering_operator_check,
    undriven,
)
from qtomo.special import hermite

X = DEFAULT_GRID.points
DX = DEFAULT_GRID.spacing
GAUSS = math.pi**-0.25 * np.exp(-X**2 / 2)


def anchor():
    return DriveSpec(parse_time_expression("1"), parse_time_expression("0.5*cos(0.9*t)"))


def test_undriven_trajectory():
    traj = undriven(2 * math.pi, samples=201)
    assert np.abs(traj.eps - np.exp(1j * traj.times)).max() <= 1e-9
    assert np.abs(traj.delta).max() == 0
    assert np.abs(traj.beta).max() == 0
    assert np.abs(traj.gamma).max() == 0


def test_constant_drive_delta():
    phi0 = 0.7
    traj = integrate_trajectory(DriveSpec.constant(1.0, phi0), 6.0, samples=61)
    exact = -(phi0 / math.sqrt(2)) * (np.exp(1j * traj.times) - 1)
    assert np.abs(traj.delta - exact).max() <= 1e-8


def test_wronskian_parametric():
    drive = DriveSpec(parse_time_expression("1 + 0.1*cos(t)"), parse_time_expression("0"), require_unit_start=False)
    traj = integrate_trajectory(drive, 20.0, samples=2001)
    assert np.abs(traj.alpha - 1).max() <= 1e-10
    assert traj.beta.dtype == np.float64


def test_omega_start_enforced():
    with pytest.raises(ValueError):
        DriveSpec(parse_time_expression("1 + 0.1*cos(t)"), parse_time_expression("0"))


def test_bad_arguments():
    with pytest.raises(ValueError):
        integrate_trajectory(DriveSpec.constant(), -1.0)
    with pytest.raises(ValueError):
        integrate_trajectory(DriveSpec.constant(), 1.0, tol=1e-2)
    with pytest.raises(ValueError):
        integrate_trajectory(DriveSpec(parse_time_expression("1 - t"), parse_time_expression("0")), 2.0)


def test_ground_state_at_start():
    traj = integrate_trajectory(anchor(), 1.0, times=np.array([0.0, 1.0]))
    assert np.abs(ground_state(traj, 0) - GAUSS).max() <= 1e-10


def test_undriven_ground_state_is_stationary():
    traj = undriven(5.0, samples=6)
    for i in range(len(traj)):
        assert np.abs(np.abs(ground_state(traj, i)) ** 2 - GAUSS**2).max() <= 1e-8


@pytest.mark.parametrize("n", [0, 1, 2])
def test_schrodinger_residual_dynamical_phase(n):
    h = 1e-4
    traj = integrate_trajectory(anchor(), 3.0 + h, times=np.array([3.0 - h, 3.0, 3.0 + h]))
    before, mid, after = (excited_state(traj, n, i, phase="dynamical") for i in range(3))
    lhs = 1j * (after - before) / (2 * h)
    rhs = hamiltonian_apply(mid, DEFAULT_GRID, 1.0, 0.5 * math.cos(0.9 * 3.0))
    assert math.sqrt(np.sum(np.abs(lhs - rhs) ** 2) * DX) <= 1e-4


def test_printed_phase_differs_only_globally():
    traj = integrate_trajectory(anchor(), 3.0, times=np.array([3.0]))
    a = excited_state(traj, 2, 0, phase="printed")
    b = excited_state(traj, 2, 0, phase="dynamical")
    overlap = abs(np.vdot(a, b)) * DX
    assert overlap == pytest.approx(1.0, abs=1e-12)


def test_excited_states():
    traj = integrate_trajectory(anchor(), 4.0, times=np.array([0.0, 4.0]))
    assert np.abs(excited_state(traj, 0, 1) - ground_state(traj, 1)).max() <= 1e-12
    first = X * np.exp(-X**2 / 2)
    first /= math.sqrt(np.sum(first**2) * DX)
    assert abs(np.vdot(first, excited_state(traj, 1, 0))) * DX >= 1 - 1e-10
    for i in range(2):
        psis = np.array([excited_state(traj, n, i) for n in range(6)])
        gram = psis.conj() @ psis.T * DX
        assert np.abs(gram - np.eye(6)).max() <= 1e-8


def test_excitation_range():
    traj = undriven(1.0, samples=2)
    with pytest.raises(StateError):
        excited_state(traj, 13, 0)


def test_lowering_operator():
    traj = undriven(1.0, samples=2)
    assert lowering_operator_check(traj, 0) <= 1e-8
    traj = integrate_trajectory(anchor(), 5.0, times=np.array([5.0]))
    assert lowering_operator_check(traj, 0) <= 1e-6
    psi = ground_state(traj, 0)
    assert lowering_operator_check(traj, 0, psi=psi * np.exp(0.7j)) == pytest.approx(
        lowering_operator_check(traj, 0, psi=psi), abs=1e-15)


def test_density_matrix():
    traj = undriven(1.0, samples=2)
    rho = density_matrix(traj, 0, 0)
    exact = np.exp(-(X[:, None] ** 2 + X[None, :] ** 2) / 2) / math.sqrt(math.pi)
    assert np.abs(rho.entries - exact).max() <= 1e-10
    traj = integrate_trajectory(anchor(), 2.0, times=np.array([2.0]))
    for n in (0, 3):
        rho = density_matrix(traj, n, 0)
        assert rho.purity_defect() <= 1e-8
        assert rho.trace() == pytest.approx(1.0, abs=1e-8)
        assert rho.hermiticity_defect() <= 1e-15


def test_density_factors_fallback():
    psi = excited_state(undriven(1.0, samples=2), 2, 0)
    rho = DensityMatrix(DEFAULT_GRID, np.outer(psi, psi.conj()))
    w, cols = rho.factors()
    rebuilt = (cols * w) @ cols.conj().T
    assert np.abs(rebuilt - rho.entries).max() <= 1e-12


def test_hermite_recurrence():
    x = np.linspace(-3, 3, 7)
    for n in range(8):
        coeffs = np.zeros(n + 1)
        coeffs[n] = 1
        np.testing.assert_allclose(hermite(n, x), np.polynomial.hermite.hermval(x, coeffs), rtol=1e-13)
