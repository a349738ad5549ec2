import numpy as np
import pytest

from qtomo.grids import GridSpec
from qtomo.schemes import (
    NonHermitianSchemeError,
    SchemeError,
    SymmetrizationScheme,
    builtin_scheme,
    characteristic_G,
    check_odd_moment_recursion,
    momentum_matrix,
    moments,
    point_scheme,
    position_matrix,
    quantize_monomial,
    scheme_from_config,
)

GRID = GridSpec(-8.0, 8.0, 64)


def test_builtin_atoms():
    assert builtin_scheme("weyl").nodes == ((0.5, 1.0),)
    assert builtin_scheme("point(0)").nodes == ((0.0, 1.0),)
    jordan = builtin_scheme("jordan")
    assert jordan.nodes == ((0.0, 0.5), (1.0, 0.5))
    assert jordan.hermitian


def test_born_jordan_is_hermitian_density():
    bj = builtin_scheme("born_jordan")
    assert bj.hermitian
    assert abs(sum(bj.weights) - 1) < 1e-14
    assert all(0 < t < 1 for t in bj.thetas)


def test_point_scheme_range():
    with pytest.raises(SchemeError):
        builtin_scheme("point(1.5)")
    with pytest.raises(SchemeError):
        builtin_scheme("nonsense")


def test_weights_must_sum_to_one():
    with pytest.raises(SchemeError):
        SymmetrizationScheme("bad", ((0.2, 0.5),))
    with pytest.raises(SchemeError):
        SymmetrizationScheme("bad", ((0.2, -0.5), (0.8, 1.5)))


@pytest.mark.parametrize(
    "name, K, expected",
    [
        ("weyl", 4, (1, 0.5, 0.25, 0.125, 0.0625)),
        ("born_jordan", 3, (1, 1 / 2, 1 / 3, 1 / 4)),
        ("jordan", 3, (1, 0.5, 0.5, 0.5)),
    ],
)
def test_moments(name, K, expected):
    np.testing.assert_allclose(moments(builtin_scheme(name), K).sigma, expected, rtol=0, atol=1e-14)


def test_point_moments_are_powers():
    m = moments(point_scheme(0.3), 8)
    assert m.sigma == tuple(0.3**k for k in range(9))


@pytest.mark.parametrize("name", ["weyl", "jordan", "born_jordan"])
def test_odd_moment_recursion(name):
    m = moments(builtin_scheme(name), 9)
    assert check_odd_moment_recursion(m) <= 1e-12
    assert m.sigma[0] == pytest.approx(1, abs=1e-14)
    assert m.sigma[1] == pytest.approx(0.5, abs=1e-14)


def test_recursion_rejects_non_hermitian():
    with pytest.raises(NonHermitianSchemeError):
        check_odd_moment_recursion(moments(point_scheme(0.2), 5))


def test_characteristic_G():
    s = np.linspace(-7, 7, 41)
    np.testing.assert_allclose(characteristic_G(builtin_scheme("weyl"), s), np.exp(0.5j * s), atol=1e-15)
    np.testing.assert_allclose(characteristic_G(builtin_scheme("jordan"), s), (1 + np.exp(1j * s)) / 2, atol=1e-15)
    for name in ("weyl", "jordan", "born_jordan"):
        g = characteristic_G(builtin_scheme(name), s) * np.exp(-0.5j * s)
        assert np.abs(g.imag).max() <= 1e-12
        assert characteristic_G(builtin_scheme(name), 0.0) == pytest.approx(1.0)


def test_scheme_from_config_atoms_and_density():
    s = scheme_from_config([("atom", "[0.0, 0.25]"), ("atom", "[1.0, 0.25]"), ("density", "uniform")])
    assert s.hermitian
    assert abs(sum(s.weights) - 1) < 1e-12
    assert moments(s, 2).sigma[2] == pytest.approx(0.25 * 1 + 0.5 / 3, abs=1e-13)
    s = scheme_from_config([("density", "nodes([[0.25, 0.5], [0.75, 0.5]])")])
    assert s.nodes == ((0.25, 0.5), (0.75, 0.5))
    assert scheme_from_config([("name", "jordan")]).label == "jordan"
    with pytest.raises(SchemeError):
        scheme_from_config([("atom", "0.5")])
    with pytest.raises(SchemeError):
        scheme_from_config([("colour", "blue")])


def _p():
    return momentum_matrix(GRID)


def _q():
    return position_matrix(GRID)


def test_momentum_from_any_scheme():
    for name in ("weyl", "jordan", "point(0.2)"):
        m = quantize_monomial([1.0], 1, builtin_scheme(name), GRID)
        np.testing.assert_allclose(m.entries, _p(), atol=1e-12)


def test_pq_ordering_for_theta_zero():
    m = quantize_monomial([0.0, 1.0], 1, point_scheme(0.0), GRID)
    # -i(x d/dx + 1) = p q: q acts first
    np.testing.assert_allclose(m.entries, _p() @ _q(), atol=1e-10)
    x = GRID.points
    g = np.exp(-x**2 / 2)
    expected = -1j * (x * (-x * g) + g)
    np.testing.assert_allclose(m @ g, expected, atol=1e-9)


def test_weyl_symmetrizes():
    m = quantize_monomial([0.0, 1.0], 1, builtin_scheme("weyl"), GRID)
    np.testing.assert_allclose(m.entries, 0.5 * (_p() @ _q() + _q() @ _p()), atol=1e-9)


@pytest.mark.parametrize("name", ["weyl", "jordan", "born_jordan"])
@pytest.mark.parametrize("n", [0, 1, 2, 3, 4])
def test_hermitian_schemes_give_hermitian_matrices(name, n):
    rng = np.random.default_rng(n)
    m = quantize_monomial(rng.normal(size=3), n, builtin_scheme(name), GRID)
    assert m.hermiticity_defect() <= 1e-10


def test_linear_in_symbol():
    scheme = builtin_scheme("born_jordan")
    a = quantize_monomial([0.0, 1.0, 0.5], 2, scheme, GRID)
    b = quantize_monomial([2.0, -1.0], 2, scheme, GRID)
    c = quantize_monomial([2.0, 0.0, 0.5], 2, scheme, GRID)
    np.testing.assert_allclose((a + b).entries, c.entries, atol=1e-12)


@pytest.mark.parametrize("name", ["weyl", "jordan"])
def test_scheme_is_mixture_of_points(name):
    scheme = builtin_scheme(name)
    f = [0.3, -1.0, 0.25]
    total = sum(w * quantize_monomial(f, 2, point_scheme(t), GRID).entries for t, w in scheme.nodes)
    np.testing.assert_allclose(quantize_monomial(f, 2, scheme, GRID).entries, total, atol=1e-10)


def test_grid_must_cover_six():
    with pytest.raises(ValueError):
        quantize_monomial([1.0], 1, builtin_scheme("weyl"), GridSpec(-3, 3, 64))
