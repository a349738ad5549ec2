import math

import numpy as np
import pytest

from qtomo.grids import GridSpec, PhaseGrid
from qtomo.oscillator import density_matrix, undriven
from qtomo.phasespace import closed_form_lambda_harmonic, fourier_image, full_wigner, partial_wigner
from qtomo.schemes import builtin_scheme
from qtomo.tomography import (
    TomographyError,
    characteristic_function,
    closed_form_tomogram,
    default_angles,
    density_transform,
    inverse_radon,
    positivity_audit,
    radon_tomogram,
    reconstruct_density,
    tomogram_characteristic,
)

GRID = PhaseGrid.square(8.0, 128)
XI = GridSpec(-8.0, 8.0, 256)
ANGLES = default_angles(16)


@pytest.fixture(scope="module")
def levels():
    return undriven(1.0, samples=2)


def _tomogram(levels, n, theta, angles=ANGLES):
    return radon_tomogram(partial_wigner(density_matrix(levels, n, 0), theta, GRID), XI, angles)


def test_ground_state_marginals(levels):
    f = _tomogram(levels, 0, 0.5)
    x = XI.points
    assert np.abs(f.values - np.exp(-x**2) / math.sqrt(math.pi)).max() <= 1e-8


def test_first_excited_tomogram(levels):
    x = XI.points
    exact = 2 / math.sqrt(math.pi) * x**2 * np.exp(-x**2)
    assert np.abs(closed_form_tomogram(1, 0.5, XI, ANGLES).values - exact).max() <= 1e-14
    assert np.abs(_tomogram(levels, 1, 0.5).values - exact).max() <= 1e-8


@pytest.mark.parametrize("theta", [0.0, 0.3, 1.0])
def test_ground_state_complex_width(levels, theta):
    f = _tomogram(levels, 0, theta)
    assert np.abs(f.values - closed_form_tomogram(0, theta, XI, ANGLES).values).max() <= 1e-8
    assert np.abs(f.masses() - 1).max() <= 1e-10


def test_mollified_delta_oracle(levels):
    # the tomogram smoothed by a Gaussian of width eps is the closed form with a -> a + eps^2 / 2
    eps, theta = 0.3, 0.3
    grid = PhaseGrid.square(6.0, 128)
    W = partial_wigner(density_matrix(levels, 0, 0), theta, grid)
    qq, pp = grid.mesh()
    for alpha in (0.4, 1.1, 2.5):
        mu, nu = math.cos(alpha), math.sin(alpha)
        a = 0.25 + 1j * mu * nu * (theta - 0.5) + eps**2 / 2
        for xi in (-1.3, 0.0, 0.7, 2.0):
            kernel = np.exp(-(xi - mu * qq - nu * pp) ** 2 / (2 * eps**2)) / (eps * math.sqrt(2 * math.pi))
            brute = np.sum(W.values * kernel) * grid.cell
            exact = np.exp(-xi**2 / (4 * a)) / (2 * np.sqrt(np.pi * a))
            assert abs(brute - exact) <= 1e-8


def test_homogeneity(levels):
    f = _tomogram(levels, 2, 0.5)
    alpha = ANGLES[3]
    mu, nu = math.cos(alpha), math.sin(alpha)
    xi = np.array([-1.0, 0.25, 1.5])
    base = f.at(xi, mu, nu)
    for lam in (2.0, 0.5, -1.5):
        assert np.abs(f.at(lam * xi, lam * mu, lam * nu) - base / abs(lam)).max() <= 1e-8
    with pytest.raises(TomographyError):
        f.at(0.0, math.cos(0.123), math.sin(0.123))


@pytest.mark.parametrize("theta, n", [(0.3, 0), (0.5, 2)])
def test_inverse_radon_round_trip(levels, theta, n):
    W = partial_wigner(density_matrix(levels, n, 0), theta, GRID)
    back = inverse_radon(radon_tomogram(W), GRID)
    assert np.abs(back.values - W.values).max() <= 1e-4
    assert abs(back.integral() - 1) <= 1e-5


def test_inverse_radon_angle_checks(levels):
    with pytest.raises(TomographyError):
        inverse_radon(_tomogram(levels, 0, 0.5, default_angles(32)), GRID)
    skewed = np.sort(np.random.default_rng(0).uniform(0, np.pi, 128))
    with pytest.raises(TomographyError):
        inverse_radon(_tomogram(levels, 0, 0.5, skewed), GRID)


def test_support_check(levels):
    W = partial_wigner(density_matrix(levels, 3, 0), 0.5, GRID)
    with pytest.raises(TomographyError):
        radon_tomogram(W, GridSpec(-2.0, 2.0, 64), ANGLES)


def test_characteristic_function_against_closed_form(levels):
    for theta, n in ((0.0, 0), (0.5, 1), (0.8, 2)):
        lam = fourier_image(partial_wigner(density_matrix(levels, n, 0), theta, GRID))
        s = GridSpec(-8.0, 8.0, 64)
        F = characteristic_function(lam, ANGLES, s)
        mu, nu = np.cos(ANGLES)[:, None], np.sin(ANGLES)[:, None]
        exact = 2 * np.pi * closed_form_lambda_harmonic(n, theta, s.points * mu, s.points * nu)
        assert np.abs(F.values - exact).max() <= 1e-8
        assert np.abs(F.at_zero() - 1).max() <= 1e-10


def test_characteristic_function_reach(levels):
    lam = fourier_image(partial_wigner(density_matrix(levels, 0, 0), 0.5, GRID))
    with pytest.raises(TomographyError):
        characteristic_function(lam, ANGLES, GridSpec(-64.0, 64.0, 64))
    F = characteristic_function(lam, ANGLES, GridSpec(-64.0, 64.0, 64), strict=False)
    assert np.all(F.values[:, 0] == 0)


def test_tomogram_characteristic_matches_rays(levels):
    f = _tomogram(levels, 1, 0.3)
    F = tomogram_characteristic(f)
    near = np.abs(F.s.points) <= 10
    mu, nu = np.cos(ANGLES)[:, None], np.sin(ANGLES)[:, None]
    s = F.s.points[near]
    exact = 2 * np.pi * closed_form_lambda_harmonic(1, 0.3, s * mu, s * nu)
    assert np.abs(F.values[:, near] - exact).max() <= 1e-8


@pytest.fixture(scope="module")
def rho(levels):
    return density_matrix(levels, 1, 0)


@pytest.mark.parametrize("theta", [0.0, 0.3, 0.5, 1.0])
def test_density_reconstruction(rho, theta):
    lam = fourier_image(partial_wigner(rho, theta, GRID))
    out = GridSpec(-16 * lam.grid.q.spacing, 16 * lam.grid.q.spacing, 32)
    rt = reconstruct_density(lam, theta, out)
    assert np.abs(rt - rt.conj().T).max() <= 1e-10
    assert np.abs(rt - density_transform(rho, out)).max() <= 1e-8
    trace = np.trace(rt).real * out.spacing
    assert trace == pytest.approx(1.0, abs=1e-8)


def test_reconstruction_argument_checks(rho):
    lam = fourier_image(partial_wigner(rho, 0.3, GRID))
    out = GridSpec(-8.0, 8.0, 32)
    with pytest.raises(ValueError):
        reconstruct_density(lam, 0.5, out)
    with pytest.raises(ValueError):
        reconstruct_density(lam, 0.3, out)


def test_scheme_tomograms_are_real(rho):
    for name in ("weyl", "jordan", "born_jordan"):
        f = radon_tomogram(full_wigner(rho, builtin_scheme(name), GRID), XI, ANGLES)
        assert np.abs(f.values.imag).max() <= 1e-9


def test_positivity_audit(levels, caplog):
    for n in (0, 2):
        assert positivity_audit(_tomogram(levels, n, 0.5)) >= -1e-8
    jordan = radon_tomogram(full_wigner(density_matrix(levels, 2, 0), builtin_scheme("jordan"), GRID), XI, ANGLES)
    low = positivity_audit(jordan)
    assert math.isfinite(low)
    assert (low < -1e-8) == any("negative" in r.message for r in caplog.records)


def test_partial_tomogram_has_imaginary_part(levels):
    f = _tomogram(levels, 0, 0.0)
    assert np.abs(f.values.imag).max() > 1e-3
    assert np.abs(f.values[0].imag).max() <= 1e-10
