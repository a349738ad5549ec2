"""Partial (theta) and scheme-averaged Wigner functions and their Fourier images.

Conventions::

    W_theta(q, p) = 1/(2 pi) int e^{ipz} rho(q - theta z, q + (1-theta) z) dz
    Lambda(k, w)  = 1/(2 pi) int W(q, p) e^{i(kq + wp)} dq dp

With these, Lambda_theta = Lambda_{1/2} * exp(-i k w (theta - 1/2)).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .grids import GridSpec, PhaseGrid, dual_of, fourier_sum, upsample
from .oscillator import DEFAULT_GRID, DensityMatrix, Trajectory, density_matrix
from .schemes import OperatorMatrix, SymmetrizationScheme, characteristic_G
from .special import MAX_ORDER, laguerre

Z_OVERSAMPLE = 4
PSI_UPSAMPLE = 16
SPLINE_ORDER = 5
EDGE_TOL = 1e-10


class InterpolationError(ValueError):
    pass


def _tag_repr(tag):
    return f"theta={tag:g}" if isinstance(tag, float) else f"scheme={tag}"


@dataclass(frozen=True)
class WignerField:
    grid: PhaseGrid
    values: np.ndarray = field(repr=False)
    tag: float | str

    @property
    def theta(self) -> float | None:
        return self.tag if isinstance(self.tag, float) else None

    def integral(self) -> complex:
        return complex(self.values.sum() * self.grid.cell)

    def __repr__(self):
        return f"WignerField({self.grid.shape}, {_tag_repr(self.tag)})"


@dataclass(frozen=True)
class FourierImage:
    """Samples of Lambda on the dual grid (axes k, omega); ``source`` is the phase grid."""

    grid: PhaseGrid
    values: np.ndarray = field(repr=False)
    tag: float | str
    source: PhaseGrid | None = None

    @property
    def theta(self) -> float | None:
        return self.tag if isinstance(self.tag, float) else None

    @property
    def k(self) -> np.ndarray:
        return self.grid.q.points

    @property
    def omega(self) -> np.ndarray:
        return self.grid.p.points

    def origin(self) -> complex:
        i = int(round(-self.grid.q.min / self.grid.q.spacing))
        j = int(round(-self.grid.p.min / self.grid.p.spacing))
        return complex(self.values[i, j])

    def replace(self, values, tag=None) -> "FourierImage":
        return FourierImage(self.grid, values, self.tag if tag is None else tag, self.source)

    def __repr__(self):
        return f"FourierImage({self.grid.shape}, {_tag_repr(self.tag)})"


class _SplineLine:
    """Band-limited refinement then spline evaluation of a grid function; zero outside."""

    def __init__(self, values, grid: GridSpec, factor: int = PSI_UPSAMPLE):
        fine = upsample(np.asarray(values, dtype=complex), factor)
        self.min = grid.min
        self.step = grid.spacing / factor
        self.re = fine.real
        self.im = fine.imag

    def __call__(self, x):
        idx = (np.asarray(x) - self.min) / self.step
        coords = idx.reshape(1, -1)
        kw = dict(order=SPLINE_ORDER, mode="grid-constant", cval=0.0)
        out = map_coordinates(self.re, coords, **kw) + 1j * map_coordinates(self.im, coords, **kw)
        return out.reshape(idx.shape)


def _check_edges(rho: DensityMatrix):
    a = np.abs(rho.entries)
    edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
    if edge > EDGE_TOL * a.max():
        raise InterpolationError("density matrix does not decay inside its grid; enlarge the grid")


def _z_axis(p: GridSpec, oversample: int = Z_OVERSAMPLE):
    nz = p.count * oversample
    dz = 2 * np.pi / (nz * p.spacing)
    return -dz * (nz // 2), dz, nz


def partial_wigner(rho: DensityMatrix, theta: float, grid: PhaseGrid) -> WignerField:
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta={theta} outside [0, 1]")
    _check_edges(rho)
    z_min, dz, nz = _z_axis(grid.p)
    z = z_min + dz * np.arange(nz)
    q = grid.q.points
    x1 = q[:, None] - theta * z[None, :]
    x2 = q[:, None] + (1.0 - theta) * z[None, :]
    weights, cols = rho.factors()
    line = np.zeros((q.size, nz), dtype=complex)
    for w, col in zip(weights, cols.T):
        f = _SplineLine(col, rho.grid)
        line += w * f(x1) * np.conj(f(x2))
    values = fourier_sum(line, 1, (z_min, dz, nz), grid.p, +1) / (2 * np.pi)
    return WignerField(grid, values, float(theta))


def full_wigner(rho: DensityMatrix, scheme: SymmetrizationScheme, grid: PhaseGrid) -> WignerField:
    values = np.zeros(grid.shape, dtype=complex)
    for theta, w in scheme.nodes:
        values += w * partial_wigner(rho, theta, grid).values
    return WignerField(grid, values, scheme.label)


def inverse_partial_wigner(W: WignerField, out_grid: GridSpec) -> DensityMatrix:
    """rho(x, y) = int e^{-ip(y-x)} W_theta((1-theta) x + theta y, p) dp."""
    theta = W.theta
    if theta is None:
        raise ValueError("inversion needs a theta-tagged field, not a scheme average")
    p = W.grid.p
    nz = p.count * Z_OVERSAMPLE
    dz = 2 * np.pi / (nz * p.spacing)
    zgrid = GridSpec(-dz * (nz // 2), dz * (nz // 2), nz)
    r = fourier_sum(W.values, 1, p, zgrid, -1)
    x = out_grid.points
    xx, yy = np.meshgrid(x, x, indexing="ij")
    qi = W.grid.q.index_of((1 - theta) * xx + theta * yy)
    zi = zgrid.index_of(yy - xx)
    coords = np.stack([qi.ravel(), zi.ravel()])
    kw = dict(order=SPLINE_ORDER, mode="grid-constant", cval=0.0)
    vals = map_coordinates(r.real, coords, **kw) + 1j * map_coordinates(r.imag, coords, **kw)
    return DensityMatrix(out_grid, vals.reshape(xx.shape))


def fourier_image(W: WignerField) -> FourierImage:
    dual = W.grid.dual()
    lam = fourier_sum(W.values, 0, W.grid.q, dual.q, +1)
    lam = fourier_sum(lam, 1, W.grid.p, dual.p, +1) / (2 * np.pi)
    return FourierImage(dual, lam, W.tag, W.grid)


def inverse_fourier_image(lam: FourierImage, grid: PhaseGrid | None = None) -> WignerField:
    grid = grid or lam.source or PhaseGrid(dual_of(lam.grid.q), dual_of(lam.grid.p))
    w = fourier_sum(lam.values, 0, lam.grid.q, grid.q, -1)
    w = fourier_sum(w, 1, lam.grid.p, grid.p, -1) / (2 * np.pi)
    return WignerField(grid, w, lam.tag)


# closed forms for the undriven oscillator ------------------------------------------

def weyl_ground(q, p):
    return np.exp(-q**2 - p**2) / np.pi


def partial_ground(theta, q, p):
    """theta-Wigner function of the oscillator ground state."""
    s = theta**2 + (1 - theta) ** 2
    return np.exp(-q**2 + 0.5 * ((2 * theta - 1) * q + 1j * p) ** 2 / s) / (np.pi * math.sqrt(2 * s))


def jordan_ground(q, p):
    return np.exp(-(q**2 + p**2) / 2) * np.cos(p * q) / (np.pi * math.sqrt(2))


def weyl_excited(n, q, p):
    """Weyl Wigner function of the n-th oscillator level (rotation-symmetric Laguerre argument)."""
    return (-1) ** n / np.pi * np.exp(-q**2 - p**2) * laguerre(n, 2 * (q**2 + p**2))


def ordering_phase(tag, k, omega):
    """Factor turning the Weyl Fourier image into the theta or scheme one."""
    kw = np.asarray(k) * np.asarray(omega)
    if isinstance(tag, SymmetrizationScheme):
        return np.exp(0.5j * kw) * characteristic_G(tag, -kw)
    return np.exp(-1j * kw * (float(tag) - 0.5))


def closed_form_lambda_harmonic(n: int, tag, k, omega):
    """Fourier image of the n-th oscillator level under a theta or scheme ordering."""
    if not 0 <= n <= MAX_ORDER:
        raise ValueError(f"n={n} outside 0..{MAX_ORDER}")
    k = np.asarray(k, dtype=float)
    omega = np.asarray(omega, dtype=float)
    r2 = k**2 + omega**2
    base = np.exp(-r2 / 4) * laguerre(n, r2 / 2) / (2 * np.pi)
    return base * ordering_phase(tag, k, omega)


def lambda_driven_oracle(traj: Trajectory, n: int, theta: float, t: int, grid: PhaseGrid,
                         state_grid: GridSpec = DEFAULT_GRID) -> FourierImage:
    rho = density_matrix(traj, n, t, state_grid)
    return fourier_image(partial_wigner(rho, theta, grid))


def expectation(op: OperatorMatrix, rho: DensityMatrix, symbol, W: WignerField) -> tuple[float, float]:
    """(Tr A rho, int A W dq dp)."""
    if op.grid != rho.grid:
        raise ValueError("operator and density matrix use different grids")
    # rho as a kernel: Tr(A rho) = sum_ij A_ij rho(x_j, x_i) dx
    trace = np.sum(op.entries * rho.entries.T) * rho.grid.spacing
    qq, pp = W.grid.mesh()
    phase = np.sum(symbol(qq, pp) * W.values) * W.grid.cell
    return float(np.real(trace)), float(np.real(phase))
