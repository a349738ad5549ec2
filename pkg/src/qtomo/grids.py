"""Uniform periodic grids and exact discrete Fourier sums on them."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class GridError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Uniform grid ``min + j*spacing`` for ``j < count``; the right end is excluded."""

    min: float
    max: float
    count: int

    def __post_init__(self):
        if not self.max > self.min:
            raise GridError(f"grid max ({self.max}) must exceed min ({self.min})")
        if self.count < 8:
            raise GridError(f"grid needs at least 8 points, got {self.count}")
        if self.count & (self.count - 1):
            raise GridError(f"grid count must be a power of two, got {self.count}")

    @property
    def spacing(self) -> float:
        return (self.max - self.min) / self.count

    @property
    def points(self) -> np.ndarray:
        return self.min + self.spacing * np.arange(self.count)

    @property
    def width(self) -> float:
        return self.max - self.min

    def dual(self, oversample: int = 1) -> "GridSpec":
        """Reciprocal grid centred on zero, ``count*oversample`` points."""
        n = self.count * oversample
        dk = 2 * np.pi / (n * self.spacing)
        return GridSpec(-dk * (n // 2), dk * (n // 2), n)

    @classmethod
    def symmetric(cls, half_width: float, count: int) -> "GridSpec":
        return cls(-half_width, half_width, count)

    def index_of(self, x) -> np.ndarray:
        """Fractional index of coordinate(s) ``x``."""
        return (np.asarray(x, dtype=float) - self.min) / self.spacing


@dataclass(frozen=True)
class PhaseGrid:
    q: GridSpec
    p: GridSpec

    @property
    def shape(self) -> tuple[int, int]:
        return (self.q.count, self.p.count)

    @property
    def cell(self) -> float:
        return self.q.spacing * self.p.spacing

    def mesh(self):
        return np.meshgrid(self.q.points, self.p.points, indexing="ij")

    def dual(self) -> "PhaseGrid":
        return PhaseGrid(self.q.dual(), self.p.dual())

    @classmethod
    def square(cls, half_width: float, count: int) -> "PhaseGrid":
        g = GridSpec.symmetric(half_width, count)
        return cls(g, g)


def dual_of(dual: GridSpec) -> GridSpec:
    """Inverse of ``GridSpec.dual`` for a zero-centred grid."""
    dx = 2 * np.pi / (dual.count * dual.spacing)
    n = dual.count
    return GridSpec(-dx * (n // 2), dx * (n // 2), n)


def fourier_sum(values, axis, x: GridSpec | tuple, k: GridSpec, sign: int) -> np.ndarray:
    """Exact ``sum_m values[m] exp(sign*i*k_j*x_m) * dx`` evaluated for all ``k_j``.

    ``x`` may be a GridSpec or a ``(min, spacing, count)`` triple. The product of
    spacings must equal ``2*pi/L`` for an integer ``L`` no smaller than either
    length; the sum is then carried out with one FFT of length ``L``.
    """
    if isinstance(x, GridSpec):
        x_min, dx, nx = x.min, x.spacing, x.count
    else:
        x_min, dx, nx = x
    values = np.moveaxis(np.asarray(values, dtype=complex), axis, -1)
    if values.shape[-1] != nx:
        raise GridError(f"axis length {values.shape[-1]} does not match grid ({nx})")
    ratio = 2 * np.pi / (dx * k.spacing)
    n_fft = int(round(ratio))
    if abs(ratio - n_fft) > 1e-8 * ratio or n_fft < max(nx, k.count):
        raise GridError("grids are not in discrete-Fourier reciprocity")
    m = np.arange(nx)
    j = np.arange(k.count)
    v = values * np.exp(sign * 1j * k.min * dx * m)
    if sign > 0:
        out = np.fft.ifft(v, n=n_fft, axis=-1) * n_fft
    else:
        out = np.fft.fft(v, n=n_fft, axis=-1)
    out = out[..., : k.count]
    out *= np.exp(sign * 1j * (k.min + k.spacing * j) * x_min) * dx
    return np.moveaxis(out, -1, axis)


def wavenumbers(grid: GridSpec, zero_nyquist: bool = False) -> np.ndarray:
    """Angular wavenumbers in FFT order for the periodic box of ``grid``."""
    kappa = 2 * np.pi * np.fft.fftfreq(grid.count, d=grid.spacing)
    if zero_nyquist:
        kappa[grid.count // 2] = 0.0
    return kappa


def spectral_derivative(values, grid: GridSpec, order: int = 1, axis: int = -1) -> np.ndarray:
    kappa = wavenumbers(grid, zero_nyquist=order % 2 == 1)
    shape = [1] * np.ndim(values)
    shape[axis] = grid.count
    factor = (1j * kappa.reshape(shape)) ** order
    return np.fft.ifft(np.fft.fft(values, axis=axis) * factor, axis=axis)


def differentiation_matrix(grid: GridSpec) -> np.ndarray:
    """Real antisymmetric first-derivative matrix of the periodic Fourier basis."""
    n = grid.count
    kappa = wavenumbers(grid, zero_nyquist=True)
    eye = np.eye(n)
    d = np.fft.ifft(1j * kappa[:, None] * np.fft.fft(eye, axis=0), axis=0).real
    return 0.5 * (d - d.T)


def upsample(values, factor: int) -> np.ndarray:
    """Band-limited (zero-padded spectrum) refinement of a periodic sample vector."""
    n = values.shape[-1]
    spec = np.fft.fft(values, axis=-1)
    m = n * factor
    out = np.zeros(values.shape[:-1] + (m,), dtype=complex)
    half = n // 2
    out[..., :half] = spec[..., :half]
    out[..., m - half + 1:] = spec[..., half + 1:]
    # split the Nyquist bin symmetrically
    out[..., half] = 0.5 * spec[..., half]
    out[..., m - half] = 0.5 * spec[..., half]
    return np.fft.ifft(out, axis=-1) * factor
