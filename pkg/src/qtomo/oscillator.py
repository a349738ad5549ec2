"""Driven parametric oscillator: master trajectory and exact states.

Hamiltonian ``p^2/2 + Omega(t)^2 q^2/2 - phi(t) q`` with Omega(0) = 1. The
complex solution eps of ``eps'' + Omega^2 eps = 0`` (eps(0)=1, eps'(0)=i) and the
drive integral ``delta' = -(i/sqrt2) eps phi`` (delta(0)=0) determine every state.

Ground state used here::

    psi_0 = N exp(i eps'/(2 eps) x^2 - sqrt2 delta/eps x) * exp(i phase(t))

The x-dependence is fixed by the annihilation condition A(t) psi_0 = 0. Two global
phases are available: ``"printed"`` uses the integral of gamma(t), and
``"dynamical"`` uses the phase that makes psi_0 solve the time-dependent
Schrodinger equation, ``phase' = Re(delta^2/eps^2) - 1/(2|eps|^2)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp

from .grids import GridSpec, spectral_derivative
from .special import MAX_ORDER, hermite

DEFAULT_GRID = GridSpec(-10.0, 10.0, 512)
DEFAULT_TOL = 1e-10
SQRT2 = math.sqrt(2.0)


class IntegrationError(RuntimeError):
    pass


class StateError(ValueError):
    pass


@dataclass(frozen=True)
class DriveSpec:
    """Omega(t) and phi(t). Integration always starts from eps'(0) = i, so the
    Wronskian stays 1 even for drives built with ``require_unit_start=False``."""

    omega_fn: Callable
    phi_fn: Callable
    require_unit_start: bool = True

    def __post_init__(self):
        w0 = float(self.omega_fn(0.0))
        if self.require_unit_start and abs(w0 - 1.0) > 1e-12:
            raise ValueError(f"Omega(0) must equal 1, got {w0!r}")

    @classmethod
    def constant(cls, omega: float = 1.0, phi: float = 0.0) -> "DriveSpec":
        return cls(_Const(omega), _Const(phi))

    def check_window(self, t_end: float):
        t = np.linspace(0.0, t_end, 4001)
        om = np.asarray(self.omega_fn(t), dtype=float) * np.ones_like(t)
        if not np.all(np.isfinite(om)) or np.any(om <= 0):
            raise ValueError("Omega(t) must stay positive and finite on the integration window")
        ph = np.asarray(self.phi_fn(t), dtype=float) * np.ones_like(t)
        if not np.all(np.isfinite(ph)):
            raise ValueError("phi(t) is not finite on the integration window")


@dataclass(frozen=True)
class _Const:
    value: float

    def __call__(self, t):
        return self.value + 0.0 * np.asarray(t, dtype=float)

    def __str__(self):
        return repr(float(self.value))


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    eps: np.ndarray
    deps: np.ndarray
    delta: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    gamma_integral: np.ndarray = field(repr=False)
    dyn_phase: np.ndarray = field(repr=False)
    eps_phase: np.ndarray = field(repr=False)
    drive: DriveSpec | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.times)

    def index(self, t: float) -> int:
        """Index of the stored sample closest to time ``t``."""
        i = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[i] - t) > 1e-9 * max(1.0, abs(t)):
            raise StateError(f"t={t} is not a stored sample")
        return i

    def to_rows(self):
        return np.column_stack(
            [
                self.times,
                self.eps.real, self.eps.imag,
                self.deps.real, self.deps.imag,
                self.delta.real, self.delta.imag,
                self.alpha, self.beta, self.gamma,
            ]
        )

    CSV_HEADER = ("t", "re_eps", "im_eps", "re_deps", "im_deps", "re_delta", "im_delta",
                  "alpha", "beta", "gamma")


def _rhs(drive: DriveSpec):
    def f(t, y):
        eps = y[0] + 1j * y[1]
        deps = y[2] + 1j * y[3]
        delta = y[4] + 1j * y[5]
        om2 = float(drive.omega_fn(t)) ** 2
        phi = float(drive.phi_fn(t))
        ddeps = -om2 * eps
        ddelta = -1j / SQRT2 * eps * phi
        abs2 = (eps * eps.conjugate()).real
        gamma = SQRT2 * phi * (eps * delta.conjugate()).real
        dphase = (delta * delta / (eps * eps)).real - 0.5 / abs2
        return [deps.real, deps.imag, ddeps.real, ddeps.imag, ddelta.real, ddelta.imag,
                gamma, dphase, 1.0 / abs2]
    return f


def integrate_trajectory(drive: DriveSpec, t_end: float, tol: float = DEFAULT_TOL,
                         times=None, samples: int | None = None) -> Trajectory:
    """Integrate the master equations on [0, t_end] and sample them at ``times``."""
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not 0 < tol <= 1e-4:
        raise ValueError("tol must lie in (0, 1e-4]")
    drive.check_window(t_end)
    if times is None:
        n = samples or max(2, int(math.ceil(t_end / 0.01)) + 1)
        times = np.linspace(0.0, t_end, n)
    times = np.asarray(times, dtype=float)
    if times.min() < 0 or times.max() > t_end * (1 + 1e-12):
        raise ValueError("sample times must lie in [0, t_end]")
    y0 = [1.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    # an order-8 pair at tight tolerance keeps the Wronskian drift near roundoff
    sol = solve_ivp(_rhs(drive), (0.0, t_end), y0, method="DOP853", t_eval=times,
                    rtol=tol * 1e-2, atol=tol * 1e-2)
    if not sol.success:
        raise IntegrationError(f"trajectory integration failed: {sol.message}")
    y = sol.y
    eps = y[0] + 1j * y[1]
    deps = y[2] + 1j * y[3]
    delta = y[4] + 1j * y[5]
    alpha = (1j * (eps * deps.conj() - deps * eps.conj())).real / 2
    beta = (delta * eps.conj()).real
    phi = np.asarray(drive.phi_fn(times), dtype=float) * np.ones_like(times)
    gamma = SQRT2 * phi * (eps * delta.conj()).real
    return Trajectory(times, eps, deps, delta, alpha, beta, gamma, y[6], y[7], y[8], drive)


def _norm(psi, grid):
    return math.sqrt(float(np.sum(np.abs(psi) ** 2) * grid.spacing))


def _gaussian_part(traj: Trajectory, i: int, x):
    eps, deps, delta = traj.eps[i], traj.deps[i], traj.delta[i]
    if abs(eps) == 0:
        raise IntegrationError("|eps| vanished; trajectory is corrupt")
    abs2 = abs(eps) ** 2
    beta = traj.beta[i]
    expo = 1j * deps / (2 * eps) * x**2 - SQRT2 * delta / eps * x - beta**2 / abs2
    return (math.pi * abs2) ** -0.25 * np.exp(expo)


def _global_phase(traj, i, phase):
    if phase == "printed":
        return np.exp(1j * traj.gamma_integral[i])
    if phase == "dynamical":
        return np.exp(1j * traj.dyn_phase[i])
    raise ValueError(f"unknown phase convention {phase!r}")


def ground_state(traj: Trajectory, t: int, grid: GridSpec = DEFAULT_GRID,
                 phase: str = "printed") -> np.ndarray:
    psi = _gaussian_part(traj, t, grid.points) * _global_phase(traj, t, phase)
    return psi / _norm(psi, grid)


def excited_state(traj: Trajectory, n: int, t: int, grid: GridSpec = DEFAULT_GRID,
                  phase: str = "printed") -> np.ndarray:
    if not 0 <= n <= MAX_ORDER:
        raise StateError(f"excitation n={n} outside 0..{MAX_ORDER}")
    x = grid.points
    eps = traj.eps[t]
    scale = abs(eps)
    u = (x + SQRT2 * traj.beta[t]) / scale
    if phase == "printed":
        pref = (eps.conjugate() / (2 * scale)) ** (n / 2)
    else:
        pref = np.exp(-1j * n * traj.eps_phase[t]) * 2.0 ** (-n / 2)
    psi = pref / math.sqrt(math.factorial(n)) * hermite(n, u) * _gaussian_part(traj, t, x)
    psi = psi * _global_phase(traj, t, phase)
    psi = psi / _norm(psi, grid)
    norm = _norm(psi, grid)
    if abs(norm - 1.0) > 1e-12:
        raise StateError(f"renormalization failed (norm={norm!r})")
    return psi


def hamiltonian_apply(psi, grid: GridSpec, omega: float, phi: float):
    x = grid.points
    d2 = spectral_derivative(psi, grid, order=2)
    return -0.5 * d2 + (0.5 * omega**2 * x**2 - phi * x) * psi


def lowering_operator_check(traj: Trajectory, t: int, grid: GridSpec = DEFAULT_GRID,
                            psi=None) -> float:
    """L2 norm of A(t) psi_0 with A = (i/sqrt2)(eps p - eps' x) + delta."""
    if psi is None:
        psi = ground_state(traj, t, grid)
    p_psi = -1j * spectral_derivative(psi, grid)
    a_psi = 1j / SQRT2 * (traj.eps[t] * p_psi - traj.deps[t] * grid.points * psi) + traj.delta[t] * psi
    return _norm(a_psi, grid)


@dataclass(frozen=True)
class DensityMatrix:
    """rho(x_i, y_j) on a position grid, optionally with a known low-rank factorization."""

    grid: GridSpec
    entries: np.ndarray = field(repr=False)
    _factors: tuple | None = field(default=None, repr=False, compare=False)

    @classmethod
    def pure(cls, psi, grid: GridSpec) -> "DensityMatrix":
        psi = np.asarray(psi, dtype=complex)
        return cls(grid, np.outer(psi, psi.conj()), (np.array([1.0]), psi[:, None]))

    def trace(self) -> float:
        return float(np.real(np.trace(self.entries)) * self.grid.spacing)

    def hermiticity_defect(self) -> float:
        a = self.entries
        return float(np.abs(a - a.conj().T).max())

    def factors(self, rel_cut: float = 1e-14):
        """(weights, columns) with rho = sum_w w * col col^dagger."""
        if self._factors is not None:
            return self._factors
        a = 0.5 * (self.entries + self.entries.conj().T)
        w, v = np.linalg.eigh(a)
        keep = np.abs(w) > rel_cut * np.abs(w).max()
        return w[keep], v[:, keep]

    def purity_defect(self) -> float:
        """max |rho.rho - rho| with the grid quadrature weight."""
        r = self.entries
        return float(np.abs(r @ r * self.grid.spacing - r).max())


def density_matrix(traj: Trajectory, n: int, t: int, grid: GridSpec = DEFAULT_GRID) -> DensityMatrix:
    return DensityMatrix.pure(excited_state(traj, n, t, grid), grid)


def undriven(t_end: float = 2 * math.pi, samples: int | None = None) -> Trajectory:
    """Trajectory of the plain oscillator (Omega = 1, phi = 0)."""
    return integrate_trajectory(DriveSpec.constant(), t_end, samples=samples)
