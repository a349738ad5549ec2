"""Symmetrization rules Q(theta) and quantization of symbols f(q) p^n."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import polynomial as P

from .grids import GridSpec, differentiation_matrix

HERMITIAN_TOL = 1e-12
MASS_TOL = 1e-12
DEFAULT_DENSITY_NODES = 16
DEFAULT_MOMENTS = 8


class SchemeError(ValueError):
    pass


class NonHermitianSchemeError(SchemeError):
    pass


@dataclass(frozen=True)
class SymmetrizationScheme:
    """Ordering rule: point atoms plus quadrature nodes of an absolutely continuous part."""

    label: str
    atoms: tuple[tuple[float, float], ...] = ()
    density_nodes: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        for theta, weight in self.atoms + self.density_nodes:
            if not 0.0 <= theta <= 1.0:
                raise SchemeError(f"{self.label}: theta={theta} outside [0, 1]")
            if not weight > 0:
                raise SchemeError(f"{self.label}: weight {weight} is not positive")
        total = sum(w for _, w in self.atoms + self.density_nodes)
        if abs(total - 1.0) > MASS_TOL:
            raise SchemeError(f"{self.label}: total mass {total!r} != 1")

    @property
    def nodes(self) -> tuple[tuple[float, float], ...]:
        """All (theta, weight) pairs, atoms first."""
        return self.atoms + self.density_nodes

    @property
    def thetas(self) -> np.ndarray:
        return np.array([t for t, _ in self.nodes])

    @property
    def weights(self) -> np.ndarray:
        return np.array([w for _, w in self.nodes])

    @property
    def hermitian(self) -> bool:
        return _reflection_invariant(self.atoms) and _reflection_invariant(self.density_nodes)

    def __str__(self):
        return self.label


def _reflection_invariant(pairs) -> bool:
    remaining = list(pairs)
    while remaining:
        theta, weight = remaining.pop()
        if abs(theta - 0.5) <= HERMITIAN_TOL:
            continue
        for i, (t2, w2) in enumerate(remaining):
            if abs(t2 - (1 - theta)) <= HERMITIAN_TOL and abs(w2 - weight) <= HERMITIAN_TOL:
                del remaining[i]
                break
        else:
            return False
    return True


def gauss_legendre_nodes(count: int = DEFAULT_DENSITY_NODES, mass: float = 1.0):
    x, w = np.polynomial.legendre.leggauss(count)
    theta = 0.5 * (x + 1.0)
    weight = 0.5 * w * mass
    # leggauss nodes are symmetric up to rounding; enforce it exactly
    theta = 0.5 * (theta + (1.0 - theta[::-1]))
    weight = 0.5 * (weight + weight[::-1])
    return tuple(zip(theta.tolist(), weight.tolist()))


def point_scheme(theta0: float) -> SymmetrizationScheme:
    if not 0.0 <= theta0 <= 1.0:
        raise SchemeError(f"point scheme needs theta in [0, 1], got {theta0}")
    return SymmetrizationScheme(f"point({theta0:g})", ((float(theta0), 1.0),))


def builtin_scheme(name: str, nodes: int = DEFAULT_DENSITY_NODES) -> SymmetrizationScheme:
    """``weyl``, ``jordan``, ``born_jordan`` or ``point(theta)``."""
    key = name.strip().lower().replace("-", "_")
    if key == "weyl":
        return SymmetrizationScheme("weyl", ((0.5, 1.0),))
    if key == "jordan":
        return SymmetrizationScheme("jordan", ((0.0, 0.5), (1.0, 0.5)))
    if key == "born_jordan":
        return SymmetrizationScheme("born_jordan", density_nodes=gauss_legendre_nodes(nodes))
    m = re.fullmatch(r"point\(\s*([^)]+?)\s*\)", key)
    if m:
        try:
            theta0 = float(m.group(1))
        except ValueError:
            raise SchemeError(f"bad point scheme {name!r}") from None
        return point_scheme(theta0)
    raise SchemeError(f"unknown scheme {name!r}")


BUILTIN_HERMITIAN = ("weyl", "jordan", "born_jordan")


def scheme_from_config(entries: list[tuple[str, str]], label: str = "custom") -> SymmetrizationScheme:
    """Build a scheme from ``(key, value)`` lines.

    ``atom = [theta, weight]`` may repeat; ``density = uniform`` spreads the mass not
    carried by atoms over Gauss-Legendre nodes, ``density = nodes([[t, w], ...])``
    lists explicit nodes. ``name = weyl`` selects a builtin instead.
    """
    atoms, density = [], []
    name = None
    density_spec = None
    for key, value in entries:
        key = key.strip().lower()
        value = value.strip()
        if key == "atom":
            try:
                theta, weight = json.loads(value)
            except (ValueError, TypeError):
                raise SchemeError(f"atom must be [theta, weight], got {value!r}") from None
            atoms.append((float(theta), float(weight)))
        elif key == "density":
            density_spec = value
        elif key in ("name", "builtin"):
            name = value
        elif key == "label":
            label = value
        elif key == "nodes_count":
            continue
        else:
            raise SchemeError(f"unknown scheme key {key!r}")
    if name is not None:
        if atoms or density_spec:
            raise SchemeError("scheme: name cannot be combined with atoms/density")
        return builtin_scheme(name)
    if density_spec is not None:
        if density_spec == "uniform":
            mass = 1.0 - sum(w for _, w in atoms)
            if mass <= 0:
                raise SchemeError("scheme: atoms leave no mass for the uniform density")
            count = dict((k.strip().lower(), v) for k, v in entries).get("nodes_count")
            density = list(gauss_legendre_nodes(int(count) if count else DEFAULT_DENSITY_NODES, mass))
        else:
            m = re.fullmatch(r"nodes\((.*)\)", density_spec, flags=re.S)
            if not m:
                raise SchemeError(f"density must be 'uniform' or 'nodes([...])', got {density_spec!r}")
            try:
                density = [(float(t), float(w)) for t, w in json.loads(m.group(1))]
            except (ValueError, TypeError):
                raise SchemeError(f"malformed density nodes {density_spec!r}") from None
    return SymmetrizationScheme(label, tuple(atoms), tuple(density))


@dataclass(frozen=True)
class MomentTable:
    sigma: tuple[float, ...]
    hermitian: bool = True

    def __getitem__(self, k):
        return self.sigma[k]

    def __len__(self):
        return len(self.sigma)


def moments(scheme: SymmetrizationScheme, K: int = DEFAULT_MOMENTS) -> MomentTable:
    """sigma_k = sum of weight * theta^k, k = 0..K."""
    if K < 0:
        raise SchemeError("K must be non-negative")
    sigma = [1.0]
    for k in range(1, K + 1):
        sigma.append(math.fsum(w * t**k for t, w in scheme.nodes))
    return MomentTable(tuple(sigma), scheme.hermitian)


def check_odd_moment_recursion(m: MomentTable) -> float:
    """Largest violation of the odd-moment relation satisfied by hermitian rules."""
    if not m.hermitian:
        raise NonHermitianSchemeError("odd-moment recursion only holds for hermitian schemes")
    s = m.sigma
    worst = abs(s[0] - 1.0)
    if len(s) > 1:
        worst = max(worst, abs(s[1] - 0.5))
    k = 1
    while 2 * k + 1 < len(s):
        rhs = 0.5 * (1 + sum((-1) ** n * math.comb(2 * k + 1, n) * s[n] for n in range(1, 2 * k + 1)))
        worst = max(worst, abs(s[2 * k + 1] - rhs))
        k += 1
    return worst


def characteristic_G(scheme: SymmetrizationScheme, s):
    """G(s) = sum of weight * exp(i s theta); vectorized over ``s``."""
    s = np.asarray(s, dtype=float)
    out = np.zeros(s.shape, dtype=complex)
    for theta, w in scheme.nodes:
        out += w * np.exp(1j * s * theta)
    return out if out.ndim else complex(out)


@dataclass(frozen=True)
class OperatorMatrix:
    """Discrete operator on a position grid: ``(A psi)_i = sum_j entries[i, j] psi_j``."""

    entries: np.ndarray = field(repr=False)
    grid: GridSpec

    @property
    def dimension(self) -> int:
        return self.entries.shape[0]

    def __add__(self, other):
        if other.grid != self.grid:
            raise ValueError("operators live on different grids")
        return OperatorMatrix(self.entries + other.entries, self.grid)

    def __matmul__(self, vec):
        return self.entries @ vec

    def hermiticity_defect(self) -> float:
        a = self.entries
        return float(np.abs(a - a.conj().T).max() / max(np.abs(a).max(), 1e-300))


def momentum_matrix(grid: GridSpec) -> np.ndarray:
    return -1j * differentiation_matrix(grid)


def position_matrix(grid: GridSpec) -> np.ndarray:
    return np.diag(grid.points).astype(complex)


def ordering_weights(scheme: SymmetrizationScheme, n: int) -> np.ndarray:
    """mu_j = integral of theta^j (1-theta)^(n-j) Q(theta), from the moment table."""
    sigma = moments(scheme, n).sigma
    mu = np.empty(n + 1)
    for j in range(n + 1):
        mu[j] = sum(math.comb(n - j, i) * (-1) ** i * sigma[i + j] for i in range(n - j + 1))
    return mu


def quantize_monomial(f, n: int, scheme: SymmetrizationScheme, grid: GridSpec) -> OperatorMatrix:
    """Operator of the symbol f(q) p^n, with ``f`` given by polynomial coefficients.

    The theta-ordered operator is sum_j C(n,j) theta^j (1-theta)^(n-j) p^(n-j) f p^j,
    which expands to (-i)^n sum_k C(n,k) (1-theta)^k f^(k) d^(n-k); averaging over
    Q replaces the theta powers by moments. Building the ordered products directly
    keeps hermitian rules exactly hermitian on the periodic grid.
    """
    if n < 0:
        raise SchemeError("power of p must be non-negative")
    if grid.min > -6 or grid.max < 6:
        raise SchemeError("quantization grid must cover at least [-6, 6]")
    coeffs = np.atleast_1d(np.asarray(f, dtype=float))
    fx = P.polyval(grid.points, coeffs)
    pm = momentum_matrix(grid)
    powers = [np.eye(grid.count, dtype=complex)]
    for _ in range(n):
        powers.append(powers[-1] @ pm)
    mu = ordering_weights(scheme, n)
    out = np.zeros((grid.count, grid.count), dtype=complex)
    for j in range(n + 1):
        c = math.comb(n, j) * mu[j]
        if c == 0.0:
            continue
        out += c * (powers[n - j] * fx[None, :]) @ powers[j]
    return OperatorMatrix(out, grid)
