"""Symplectic tomograms: Radon transforms of Wigner fields via central slices.

Directions are stored on the unit circle, (mu, nu) = (cos a, sin a) with a in [0, pi).
Tomograms are normalized to unit mass in xi, so the characteristic function is
``F(s, a) = int f e^{i s xi} dxi = 2 pi Lambda(s cos a, s sin a)`` and F(0) = 1.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import map_coordinates

from .grids import GridSpec, PhaseGrid, fourier_sum
from .phasespace import FourierImage, WignerField, inverse_fourier_image
from .special import hermite

log = logging.getLogger(__name__)

DEFAULT_XI = GridSpec(-8.0, 8.0, 512)
DEFAULT_ANGLES = 128
MIN_INVERSION_ANGLES = 64
S_OVERSAMPLE = 4


class TomographyError(ValueError):
    pass


def default_angles(count: int = DEFAULT_ANGLES) -> np.ndarray:
    return np.pi * np.arange(count) / count


@dataclass(frozen=True)
class Tomogram:
    xi: GridSpec
    angles: np.ndarray
    values: np.ndarray = field(repr=False)  # shape (len(angles), xi.count)
    tag: float | str

    def masses(self) -> np.ndarray:
        return self.values.sum(axis=1) * self.xi.spacing

    def at(self, xi, mu: float, nu: float):
        """f(xi, mu, nu) for a general direction, using homogeneity of the delta."""
        lam = math.hypot(mu, nu)
        a = math.atan2(nu, mu)
        sign = 1.0
        if a < 0:
            a += math.pi
            sign = -1.0
        if a >= math.pi - 1e-15:
            a -= math.pi
            sign = -sign
        hits = np.nonzero(np.isclose(self.angles, a, atol=1e-12))[0]
        if hits.size == 0:
            raise TomographyError(f"direction angle {a} is not sampled")
        row = self.values[hits[0]]
        idx = self.xi.index_of(sign * np.asarray(xi) / lam)
        coords = np.atleast_1d(idx)[None, :]
        kw = dict(order=5, mode="grid-constant", cval=0.0)
        out = map_coordinates(row.real, coords, **kw) + 1j * map_coordinates(row.imag, coords, **kw)
        out = out / lam
        return out.reshape(np.shape(idx)) if np.ndim(idx) else complex(out[0])


@dataclass(frozen=True)
class CharacteristicFunction:
    s: GridSpec
    angles: np.ndarray
    values: np.ndarray = field(repr=False)  # shape (len(angles), s.count)
    tag: float | str

    def at_zero(self) -> np.ndarray:
        i = int(round(-self.s.min / self.s.spacing))
        return self.values[:, i]


def ray_transform(values, grid: PhaseGrid, angles, s) -> np.ndarray:
    """F[a, j] = sum W(q, p) exp(i s_j (q cos a + p sin a)) dq dp, evaluated exactly.

    Points beyond the Nyquist band of the grid would read periodic images of the
    samples, so they are returned as zero.
    """
    q, p = grid.q.points, grid.p.points
    s = np.asarray(s, dtype=float)
    out = np.zeros((len(angles), s.size), dtype=complex)
    values = np.asarray(values, dtype=complex)
    band_q, band_p = np.pi / grid.q.spacing, np.pi / grid.p.spacing
    for a, alpha in enumerate(angles):
        mu, nu = math.cos(alpha), math.sin(alpha)
        inside = (np.abs(s * mu) <= band_q) & (np.abs(s * nu) <= band_p)
        si = s[inside]
        ep = np.exp(1j * nu * np.outer(p, si))
        eq = np.exp(1j * mu * np.outer(q, si))
        out[a, inside] = np.einsum("ij,ij->j", eq, values @ ep)
    return out * grid.cell


def _check_support(W: WignerField, xi: GridSpec):
    q, p = W.grid.q, W.grid.p
    a = np.abs(W.values)
    qq, pp = W.grid.mesh()
    outside = np.hypot(qq, pp) > min(abs(xi.min), abs(xi.max))
    if outside.any() and a[outside].max() > 1e-3 * a.max():
        raise TomographyError("Wigner field extends beyond the xi window")


def radon_tomogram(W: WignerField, xi: GridSpec = DEFAULT_XI, angles=None) -> Tomogram:
    angles = default_angles() if angles is None else np.asarray(angles, dtype=float)
    _check_support(W, xi)
    s = xi.dual()
    F = ray_transform(W.values, W.grid, angles, s.points)
    f = fourier_sum(F, 1, s, xi, -1) / (2 * np.pi)
    tomo = Tomogram(xi, angles, f, W.tag)
    mass = tomo.masses()
    if np.abs(mass - 1.0).max() > 1e-3:
        raise TomographyError(f"tomogram mass {mass.real.min():.6g} deviates from 1; W support insufficient")
    return tomo


def tomogram_characteristic(f: Tomogram, oversample: int = 1) -> CharacteristicFunction:
    """F(s, a) = int f(xi; a) e^{i s xi} dxi on the dual of the xi grid."""
    s = f.xi.dual(oversample)
    F = fourier_sum(f.values, 1, f.xi, s, +1)
    return CharacteristicFunction(s, f.angles, F, f.tag)


def tomogram_from_characteristic(F: CharacteristicFunction, xi: GridSpec) -> Tomogram:
    f = fourier_sum(F.values, 1, F.s, xi, -1) / (2 * np.pi)
    return Tomogram(xi, F.angles, f, F.tag)


def _check_angles(angles):
    n = len(angles)
    if n < MIN_INVERSION_ANGLES:
        raise TomographyError(f"need at least {MIN_INVERSION_ANGLES} angles, got {n}")
    if not np.allclose(angles, default_angles(n), atol=1e-12):
        raise TomographyError("inversion needs uniformly spaced angles covering [0, pi)")


def lambda_from_tomogram(f: Tomogram, dual: PhaseGrid) -> np.ndarray:
    """Grid the central slices onto a Cartesian (k, omega) grid."""
    _check_angles(f.angles)
    n_a = len(f.angles)
    F = tomogram_characteristic(f, S_OVERSAMPLE)
    # F(s, a + pi) = F(-s, a): extend to a full turn so the angle axis is periodic
    flipped = np.empty_like(F.values)
    flipped[:, 1:] = F.values[:, :0:-1]
    flipped[:, 0] = 0.0
    polar = np.concatenate([F.values, flipped], axis=0)
    kk, ww = dual.mesh()
    r = np.hypot(kk, ww)
    phi = np.mod(np.arctan2(ww, kk), 2 * np.pi)
    ai = phi / (np.pi / n_a)
    si = F.s.index_of(r)
    coords = np.stack([ai.ravel(), si.ravel()])
    kw = dict(order=5, mode="grid-wrap")
    vals = map_coordinates(polar.real, coords, **kw) + 1j * map_coordinates(polar.imag, coords, **kw)
    vals = vals.reshape(kk.shape)
    vals[r > F.s.max - 4 * F.s.spacing] = 0.0
    return vals / (2 * np.pi)


def inverse_radon(f: Tomogram, grid: PhaseGrid) -> WignerField:
    dual = grid.dual()
    lam = FourierImage(dual, lambda_from_tomogram(f, dual), f.tag, grid)
    return inverse_fourier_image(lam, grid)


def characteristic_function(lam: FourierImage, angles=None, s_grid: GridSpec | None = None,
                            strict: bool = True) -> CharacteristicFunction:
    """F(s, mu, nu) = 2 pi Lambda(s mu, s nu), sampled along rays.

    Off-grid values use the exact trigonometric interpolant of the samples. With
    ``strict=False`` rays may leave the image grid and read zero there.
    """
    angles = default_angles() if angles is None else np.asarray(angles, dtype=float)
    s_grid = s_grid or DEFAULT_XI.dual()
    reach = min(-lam.grid.q.min, lam.grid.q.max, -lam.grid.p.min, lam.grid.p.max)
    if strict and max(abs(s_grid.min), abs(s_grid.max)) > reach * math.sqrt(2) + 1e-12:
        raise TomographyError("rays leave the Fourier-image grid")
    W = inverse_fourier_image(lam)
    F = ray_transform(W.values, W.grid, angles, s_grid.points)
    return CharacteristicFunction(s_grid, angles, F, lam.tag)


def reconstruct_density(lam: FourierImage, theta: float, out: GridSpec, check: bool = True) -> np.ndarray:
    """rho~(k, k') = (1/2pi) int rho(x, y) e^{-i(kx - k'y)} dx dy from a theta image.

    Uses rho~(k, k') = int Lambda_theta(k' - k, w) exp(-i w (theta k + (1-theta) k')) dw.
    ``out`` must be a zero-centred grid whose spacing is a multiple of the image's k spacing.
    """
    if lam.theta is None or abs(lam.theta - theta) > 1e-12:
        raise ValueError(f"image tag {lam.tag!r} does not match theta={theta}")
    kg = lam.grid.q
    ratio = out.spacing / kg.spacing
    m = int(round(ratio))
    if abs(ratio - m) > 1e-9 or m < 1:
        raise ValueError("output spacing must be an integer multiple of the image k spacing")
    k = out.points
    omega = lam.grid.p.points
    diff = k[None, :] - k[:, None]
    idx = np.rint(kg.index_of(diff)).astype(int)
    valid = (idx >= 0) & (idx < kg.count)
    rows = lam.values[np.clip(idx, 0, kg.count - 1)]  # (N, N, n_omega)
    rows[~valid] = 0.0
    c = theta * k[:, None] + (1 - theta) * k[None, :]
    phase = np.exp(-1j * c[..., None] * omega[None, None, :])
    rt = np.sum(rows * phase, axis=-1) * lam.grid.p.spacing
    if check:
        defect = np.abs(rt - rt.conj().T).max()
        if defect > 1e-6:
            raise TomographyError(f"reconstruction not hermitian (defect {defect:.3g}); omega band too narrow")
    return rt


def density_transform(rho, out: GridSpec) -> np.ndarray:
    """Direct (1/2pi) sum rho(x, y) e^{-i(kx - k'y)} dx dy on a position-grid matrix."""
    x = rho.grid.points
    ex = np.exp(-1j * np.outer(out.points, x))
    return ex @ rho.entries @ ex.conj().T * rho.grid.spacing**2 / (2 * np.pi)


def closed_form_tomogram(n: int, theta: float, xi: GridSpec = DEFAULT_XI, angles=None) -> Tomogram:
    """Tomogram of the n-th oscillator level.

    Weyl ordering gives |psi_n(xi)|^2 for every direction. Other orderings are
    available for n = 0, where F(s) = exp(-s^2 (1/4 + i mu nu (theta - 1/2))) gives
    a Gaussian with complex width.
    """
    angles = default_angles() if angles is None else np.asarray(angles, dtype=float)
    x = xi.points
    if theta == 0.5:
        row = np.exp(-x**2) * hermite(n, x) ** 2 / (math.sqrt(math.pi) * 2.0**n * math.factorial(n))
        return Tomogram(xi, angles, np.tile(row.astype(complex), (len(angles), 1)), 0.5)
    if n != 0:
        raise ValueError("closed-form tomograms for theta != 1/2 exist only for n = 0")
    a = 0.25 + 1j * (np.cos(angles) * np.sin(angles) * (theta - 0.5))[:, None]
    values = np.exp(-x[None, :] ** 2 / (4 * a)) / (2 * np.sqrt(np.pi * a))
    return Tomogram(xi, angles, values, float(theta))


def positivity_audit(f: Tomogram) -> float:
    """Smallest real part of the tomogram; negative values breach the positivity claim."""
    low = float(f.values.real.min())
    if low < -1e-8:
        log.warning("tomogram %s has negative values down to %.3g", f.tag, low)
    return low
