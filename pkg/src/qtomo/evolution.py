"""Time evolution of theta-Wigner functions, their Fourier images and tomograms.

For H = p^2/2 + Omega(t)^2 q^2/2 - phi(t) q the Fourier image obeys

    d/dt L = s_rot k dL/dw + s_force Omega^2 w dL/dk
             + s_drive i phi w L + s_order (i/2)(1 - 2 theta)(Omega^2 w^2 - k^2) L

with signs fixed by :data:`RESOLVED` (``+, -, +, +``), the only choice that keeps the
oscillator eigenstates stationary and reproduces the exact driven states. Each step
is Strang split: half of the multiplicative factor, the linear phase-space flow for
the full step, then the other half.
"""
from __future__ import annotations

import itertools
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np
from scipy.linalg import expm
from scipy.ndimage import map_coordinates

from .grids import GridSpec, PhaseGrid, fourier_sum, spectral_derivative, wavenumbers
from .oscillator import DriveSpec, integrate_trajectory
from .phasespace import (
    FourierImage,
    WignerField,
    closed_form_lambda_harmonic,
    fourier_image,
    inverse_fourier_image,
    lambda_driven_oracle,
)
from .schemes import SymmetrizationScheme
from .tomography import (
    Tomogram,
    characteristic_function,
    lambda_from_tomogram,
    tomogram_from_characteristic,
)

DEFAULT_DT = 1e-3
MAX_CELL_SHIFT = 2.0
EDGE_TOL = 1e-6


class EvolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SignConvention:
    rot: int = 1
    force: int = -1
    drive: int = 1
    order: int = 1

    def as_tuple(self):
        return (self.rot, self.force, self.drive, self.order)

    def __str__(self):
        return "".join("+" if s > 0 else "-" for s in self.as_tuple())


RESOLVED = SignConvention()


def all_conventions():
    return [SignConvention(*signs) for signs in itertools.product((1, -1), repeat=4)]


@dataclass(frozen=True)
class EvolutionConfig:
    drive: DriveSpec
    theta_nodes: tuple[tuple[float, float], ...] = ((0.5, 1.0),)
    dt: float = DEFAULT_DT
    t_end: float = 1.0
    method: str = "split_step"
    convention: SignConvention = RESOLVED

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.t_end < self.dt:
            raise ValueError("t_end must be at least dt")
        if self.method not in ("split_step", "semi_lagrangian"):
            raise ValueError(f"unknown method {self.method!r}")
        total = sum(w for _, w in self.theta_nodes)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"theta node weights sum to {total}, not 1")

    @property
    def steps(self) -> int:
        return int(round(self.t_end / self.dt))

    @classmethod
    def for_scheme(cls, drive, scheme: SymmetrizationScheme, **kw):
        return cls(drive, tuple(scheme.nodes), **kw)


def evolution_grid(k_half: float = 12.0, count: int = 128) -> PhaseGrid:
    """Phase grid whose dual is the square [-k_half, k_half)^2 with ``count`` points."""
    dk = 2 * k_half / count
    dq = 2 * np.pi / (count * dk)
    g = GridSpec(-dq * (count // 2), dq * (count // 2), count)
    return PhaseGrid(g, g)


# -- Fourier-image propagator ------------------------------------------------------

def _omega2(drive, t):
    return float(drive.omega_fn(t)) ** 2


class LambdaPropagator:
    """One Strang step of the Fourier-image equation on a fixed (k, omega) grid."""

    def __init__(self, grid: PhaseGrid, drive: DriveSpec, theta: float, dt: float,
                 convention: SignConvention = RESOLVED, method: str = "split_step"):
        self.grid = grid
        self.drive = drive
        self.theta = float(theta)
        self.dt = dt
        self.conv = convention
        self.method = method
        self.k = grid.q.points[:, None]
        self.w = grid.p.points[None, :]
        self.kappa_k = wavenumbers(grid.q, zero_nyquist=True)[:, None]
        self.kappa_w = wavenumbers(grid.p, zero_nyquist=True)[None, :]
        self._const_omega = _is_constant(drive.omega_fn)
        self._shear_cache = {}

    def _flow_matrix(self, t):
        """M with L(x, t + dt) = L(M x, t) for the advective part (4th-order Magnus)."""
        s1, s2 = self.conv.rot, self.conv.force
        h = self.dt

        def a(tau):
            return np.array([[0.0, s2 * _omega2(self.drive, tau)], [float(s1), 0.0]])

        c = math.sqrt(3) / 6
        a1, a2 = a(t + (0.5 - c) * h), a(t + (0.5 + c) * h)
        magnus = -0.5 * h * (a1 + a2) + (math.sqrt(3) / 12) * h * h * (a2 @ a1 - a1 @ a2)
        return expm(-magnus)

    def _multiplier(self, t, half):
        om2 = _omega2(self.drive, t)
        phi = float(self.drive.phi_fn(t))
        out = np.exp(half * self.conv.drive * 1j * phi * self.w)
        if self.theta == 0.5:
            return out
        key = ("order", om2, half)
        order = self._shear_cache.get(key)
        if order is None:
            order = np.exp(half * self.conv.order * 0.5j * (1 - 2 * self.theta) * (om2 * self.w**2 - self.k**2))
            if self._const_omega:
                self._shear_cache[key] = order
        return order * out

    def _check_shift(self, m):
        corners = np.array([[self.grid.q.min, self.grid.q.max], [self.grid.p.min, self.grid.p.max]])
        worst = 0.0
        for kx in corners[0]:
            for wx in corners[1]:
                x = np.array([kx, wx])
                d = m @ x - x
                worst = max(worst, abs(d[0]) / self.grid.q.spacing, abs(d[1]) / self.grid.p.spacing)
        if worst > MAX_CELL_SHIFT:
            raise EvolutionError(f"step moves characteristics {worst:.2f} cells (> {MAX_CELL_SHIFT}); reduce dt")

    def _shears(self, m):
        key = tuple(np.round(m.ravel(), 15))
        hit = self._shear_cache.get(key)
        if hit is not None:
            return hit
        (a, b), (c, d) = m
        if abs(c) < 1e-14:
            raise EvolutionError("flow matrix has no omega-k coupling; cannot shear-factor")
        alpha, beta, gamma = (a - 1) / c, c, (d - 1) / c
        # shift along k by alpha*omega, along omega by beta*k, along k by gamma*omega
        e1 = np.exp(1j * self.kappa_k * alpha * self.w)
        e2 = np.exp(1j * self.kappa_w * beta * self.k)
        e3 = np.exp(1j * self.kappa_k * gamma * self.w)
        out = (e1, e2, e3)
        if self._const_omega:
            self._shear_cache[key] = out
        return out

    def _advect_spectral(self, values, m):
        e1, e2, e3 = self._shears(m)
        v = np.fft.ifft(np.fft.fft(values, axis=0) * e1, axis=0)
        v = np.fft.ifft(np.fft.fft(v, axis=1) * e2, axis=1)
        return np.fft.ifft(np.fft.fft(v, axis=0) * e3, axis=0)

    def _advect_interp(self, values, m):
        kk = np.broadcast_to(self.k, values.shape)
        ww = np.broadcast_to(self.w, values.shape)
        feet_k = m[0, 0] * kk + m[0, 1] * ww
        feet_w = m[1, 0] * kk + m[1, 1] * ww
        coords = np.stack([self.grid.q.index_of(feet_k).ravel(), self.grid.p.index_of(feet_w).ravel()])
        kw = dict(order=5, mode="grid-constant", cval=0.0)
        out = map_coordinates(values.real, coords, **kw) + 1j * map_coordinates(values.imag, coords, **kw)
        return out.reshape(values.shape)

    def flow(self, t):
        if self._const_omega:
            m = self._shear_cache.get("flow")
            if m is None:
                m = self._flow_matrix(t)
                self._check_shift(m)
                self._shear_cache["flow"] = m
            return m
        m = self._flow_matrix(t)
        self._check_shift(m)
        return m

    def step(self, values, t):
        out = values * self._multiplier(t, 0.5 * self.dt)
        m = self.flow(t)
        if self.method == "split_step":
            out = self._advect_spectral(out, m)
        else:
            out = self._advect_interp(out, m)
        return out * self._multiplier(t + self.dt, 0.5 * self.dt)


def _is_constant(fn) -> bool:
    t = np.linspace(0.0, 50.0, 257)
    v = np.asarray(fn(t), dtype=float) * np.ones_like(t)
    return bool(np.all(v == v[0]))


def edge_fraction(values) -> float:
    a = np.abs(values)
    edge = max(a[0].max(), a[-1].max(), a[:, 0].max(), a[:, -1].max())
    return float(edge / max(a.max(), 1e-300))


def iter_lambda_theta(lam0: FourierImage, cfg: EvolutionConfig, theta: float, every: int = 1,
                      t0: float = 0.0):
    """Yield (step, time, values) after every ``every`` steps (step 0 included)."""
    prop = LambdaPropagator(lam0.grid, cfg.drive, theta, cfg.dt, cfg.convention, cfg.method)
    values = np.array(lam0.values, dtype=complex)
    yield 0, t0, values
    for n in range(cfg.steps):
        t = t0 + n * cfg.dt
        values = prop.step(values, t)
        if (n + 1) % every == 0 or n + 1 == cfg.steps:
            yield n + 1, t0 + (n + 1) * cfg.dt, values


def evolve_lambda_theta(lam0: FourierImage, cfg: EvolutionConfig, theta: float | None = None) -> FourierImage:
    theta = lam0.theta if theta is None else float(theta)
    if lam0.theta is None or abs(lam0.theta - theta) > 1e-12:
        raise ValueError(f"initial image tag {lam0.tag!r} does not match theta={theta}")
    values = None
    for _, _, values in iter_lambda_theta(lam0, cfg, theta, every=cfg.steps):
        pass
    if edge_fraction(values) > EDGE_TOL:
        raise EvolutionError("characteristics left the Fourier-image grid")
    return lam0.replace(values)


# -- tomograms ---------------------------------------------------------------------

def evolve_tomogram_theta(f0: Tomogram, cfg: EvolutionConfig, theta: float | None = None,
                          grid: PhaseGrid | None = None) -> Tomogram:
    """Evolve a tomogram through its characteristic function F(s, mu, nu) = 2 pi Lambda(s mu, s nu)."""
    theta = f0.tag if theta is None else float(theta)
    if not isinstance(f0.tag, float) or abs(f0.tag - theta) > 1e-12:
        raise ValueError(f"tomogram tag {f0.tag!r} does not match theta={theta}")
    grid = grid or evolution_grid()
    dual = grid.dual()
    lam0 = FourierImage(dual, lambda_from_tomogram(f0, dual), theta, grid)
    lam = evolve_lambda_theta(lam0, cfg, theta)
    F = characteristic_function(lam, f0.angles, f0.xi.dual(), strict=False)
    return tomogram_from_characteristic(F, f0.xi)


# -- Wigner functions with separable Hamiltonians -------------------------------------

def evolve_wigner_separable(W0: WignerField, theta: float, Phi: Callable, dt: float, t_end: float,
                            check_aliasing: bool = True) -> WignerField:
    """Split-step evolution of W_theta for H = p^2/2 + Phi(q).

    Kinetic part in the (kappa, p) representation:
        dW/dt = -p dW/dq + (i/2)(1 - 2 theta) d^2W/dq^2   (exact exponential)
    Potential part in the (q, z) representation, R(q, z) = int e^{-ipz} W dp:
        dR/dt = -i [Phi(q - theta z) - Phi(q + (1 - theta) z)] R
    """
    grid = W0.grid
    q, p = grid.q.points, grid.p.points
    kappa = wavenumbers(grid.q)[:, None]
    kin = np.exp(0.5 * dt * (-1j * p[None, :] * kappa - 0.5j * (1 - 2 * theta) * kappa**2))
    z = grid.p.dual()
    zz = z.points[None, :]
    qq = q[:, None]
    dphi = Phi(qq - theta * zz) - Phi(qq + (1 - theta) * zz)
    pot = np.exp(-1j * dt * dphi)
    values = np.array(W0.values, dtype=complex)
    steps = int(round(t_end / dt))

    def half_kinetic(v):
        return np.fft.ifft(np.fft.fft(v, axis=0) * kin, axis=0)

    for _ in range(steps):
        values = half_kinetic(values)
        r = fourier_sum(values, 1, grid.p, z, -1)
        values = fourier_sum(r * pot, 1, z, grid.p, +1) / (2 * np.pi)
        values = half_kinetic(values)
    if check_aliasing:
        _check_aliasing(values)
    return WignerField(grid, values, float(theta))


def _check_aliasing(values):
    spec = np.abs(np.fft.fft2(values)) ** 2
    nq, np_ = spec.shape
    fq = np.abs(np.fft.fftfreq(nq))[:, None]
    fp = np.abs(np.fft.fftfreq(np_))[None, :]
    top = (fq > 1 / 3) | (fp > 1 / 3)
    frac = spec[top].sum() / spec.sum()
    if frac > 1e-6:
        raise EvolutionError(f"aliasing: {frac:.3g} of the spectral energy sits in the top third")


# -- theta families ------------------------------------------------------------------

@dataclass(frozen=True)
class FieldFamily:
    thetas: tuple[float, ...]
    weights: tuple[float, ...]
    fields: tuple[FourierImage, ...] = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        if not (len(self.thetas) == len(self.weights) == len(self.fields)):
            raise ValueError("family nodes, weights and fields differ in length")

    @classmethod
    def from_scheme(cls, scheme: SymmetrizationScheme, make_field: Callable, time: float = 0.0):
        fields = tuple(make_field(theta) for theta in scheme.thetas)
        return cls(tuple(scheme.thetas.tolist()), tuple(scheme.weights.tolist()), fields, time)

    def pairing_defect(self) -> float:
        """max |Lambda_theta(k, w) - conj(Lambda_{1-theta}(-k, -w))| over paired nodes."""
        worst = 0.0
        for i, th in enumerate(self.thetas):
            for j, th2 in enumerate(self.thetas):
                if abs(th + th2 - 1) < 1e-12:
                    a = self.fields[i].values
                    b = _reflect(self.fields[j].values)
                    worst = max(worst, float(np.abs(a - b.conj()).max()))
        return worst


def _reflect(values):
    """values(-k, -w) on a zero-centred even grid (index 0 maps to itself)."""
    return np.roll(values[::-1, ::-1], 1, axis=(0, 1))


def _evolve_node(args):
    lam, cfg, theta = args
    return evolve_lambda_theta(lam, cfg, theta)


def evolve_family(family0: FieldFamily, cfg: EvolutionConfig, workers: int = 1) -> FieldFamily:
    jobs = [(f, replace(cfg, theta_nodes=((th, 1.0),)), th) for f, th in zip(family0.fields, family0.thetas)]
    results = []
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_evolve_node, j) for j in jobs]
            for th, fut in zip(family0.thetas, futures):
                try:
                    results.append(fut.result())
                except Exception as exc:
                    raise EvolutionError(f"node theta={th} failed: {exc}") from exc
    else:
        for th, j in zip(family0.thetas, jobs):
            try:
                results.append(_evolve_node(j))
            except Exception as exc:
                raise EvolutionError(f"node theta={th} failed: {exc}") from exc
    return FieldFamily(family0.thetas, family0.weights, tuple(results), family0.time + cfg.steps * cfg.dt)


def _check_nodes(family: FieldFamily, scheme: SymmetrizationScheme):
    if len(family.thetas) != len(scheme.nodes) or any(
        abs(a - t) > 1e-12 or abs(b - w) > 1e-12
        for a, b, (t, w) in zip(family.thetas, family.weights, scheme.nodes)
    ):
        raise ValueError(f"family nodes do not match scheme {scheme.label}")


def synthesize_full(family: FieldFamily, scheme: SymmetrizationScheme, omega2: float = 1.0):
    """(full W, correction) where correction = (i/2)(d_q^2 - Omega^2 d_p^2) sum w (1-2 theta) W_theta."""
    _check_nodes(family, scheme)
    grid = family.fields[0].grid
    full = np.zeros(grid.shape, dtype=complex)
    odd = np.zeros(grid.shape, dtype=complex)
    for th, w, f in zip(family.thetas, family.weights, family.fields):
        full += w * f.values
        if th != 0.5:
            odd += w * (1 - 2 * th) * f.values
    k = grid.q.points[:, None]
    om = grid.p.points[None, :]
    corr_lam = 0.5j * (omega2 * om**2 - k**2) * odd
    src = family.fields[0].source
    full_w = inverse_fourier_image(FourierImage(grid, full, scheme.label, src))
    corr_w = inverse_fourier_image(FourierImage(grid, corr_lam, scheme.label, src))
    if not odd.any():
        corr_w = WignerField(corr_w.grid, np.zeros(grid.shape, dtype=complex), scheme.label)
    return full_w, corr_w


def residual_full_equation(history, scheme: SymmetrizationScheme, drive: DriveSpec, dt: float) -> float:
    """Max-norm residual of the full Wigner equation at the middle of three time levels."""
    if len(history) < 3:
        raise ValueError("need three stored time levels")
    before, mid, after = history[-3:]
    t = mid.time
    omega2 = _omega2(drive, t)
    phi = float(drive.phi_fn(t))
    w_before = synthesize_full(before, scheme, omega2)[0].values
    w_after = synthesize_full(after, scheme, omega2)[0].values
    w_mid, corr = synthesize_full(mid, scheme, omega2)
    g = w_mid.grid
    qq, pp = g.mesh()
    dwdt = (w_after - w_before) / (2 * dt)
    dq = spectral_derivative(w_mid.values, g.q, axis=0)
    dp = spectral_derivative(w_mid.values, g.p, axis=1)
    lhs = dwdt + pp * dq - (omega2 * qq - phi) * dp
    return float(np.abs(lhs - corr.values).max())


def run_family_history(family0: FieldFamily, cfg: EvolutionConfig, sample_times) -> dict:
    """Evolve every node and keep the family at the requested step indices."""
    wanted = sorted({int(round(t / cfg.dt)) for t in sample_times})
    per_node = []
    for f, th in zip(family0.fields, family0.thetas):
        snaps = {}
        for n, _, v in iter_lambda_theta(f, cfg, th):
            if n in wanted:
                snaps[n] = v.copy()
        per_node.append(snaps)
    out = {}
    for n in wanted:
        fields = tuple(f.replace(per_node[i][n]) for i, f in enumerate(family0.fields))
        out[n] = FieldFamily(family0.thetas, family0.weights, fields, family0.time + n * cfg.dt)
    return out


# -- analytic anchors -----------------------------------------------------------------

def anchor_stationarity(convention: SignConvention, theta: float, n: int = 0, dt: float = DEFAULT_DT,
                        t_end: float = 2 * math.pi, grid: PhaseGrid | None = None) -> float:
    """max |Lambda(t_end) - Lambda(0)| for an undriven eigenstate."""
    grid = grid or evolution_grid()
    dual = grid.dual()
    kk, ww = dual.mesh()
    lam0 = FourierImage(dual, closed_form_lambda_harmonic(n, theta, kk, ww), float(theta), grid)
    cfg = EvolutionConfig(DriveSpec.constant(), ((theta, 1.0),), dt, t_end, convention=convention)
    prop_values = None
    for _, _, prop_values in iter_lambda_theta(lam0, cfg, theta, every=cfg.steps):
        pass
    return float(np.abs(prop_values - lam0.values).max())


ANCHOR_DRIVE = "0.5*cos(0.9*t)"


def anchor_drive() -> DriveSpec:
    from .expr import parse_time_expression

    return DriveSpec(parse_time_expression("1"), parse_time_expression(ANCHOR_DRIVE))


def anchor_driven(convention: SignConvention, theta: float, n: int = 0, dt: float = DEFAULT_DT,
                  t_end: float = 5.0, grid: PhaseGrid | None = None, oracle_cache: dict | None = None) -> float:
    """max |evolved Lambda_theta - exact-state Lambda_theta| at t_end under the anchor drive."""
    grid = grid or evolution_grid()
    drive = anchor_drive()
    key = (theta, n, t_end, grid)
    if oracle_cache is not None and key in oracle_cache:
        start, target = oracle_cache[key]
    else:
        traj = integrate_trajectory(drive, t_end, times=np.array([0.0, t_end]))
        start = lambda_driven_oracle(traj, n, theta, 0, grid)
        target = lambda_driven_oracle(traj, n, theta, 1, grid)
        if oracle_cache is not None:
            oracle_cache[key] = (start, target)
    cfg = EvolutionConfig(drive, ((theta, 1.0),), dt, t_end, convention=convention)
    values = None
    for _, _, values in iter_lambda_theta(start, cfg, theta, every=cfg.steps):
        pass
    return float(np.abs(values - target.values).max())


@dataclass(frozen=True)
class SweepResult:
    convention: SignConvention
    stationarity: float
    driven: float
    passed: bool


def sign_sweep(dt: float = 2e-2, stationarity_tol: float = 1e-5, driven_tol: float = 1e-4,
               stationary_thetas=(0.0,), driven_thetas=(0.0, 1.0),
               grid: PhaseGrid | None = None) -> list[SweepResult]:
    """Run both anchors for all 16 sign conventions.

    The defaults are a reduced version of the anchors (coarser step and grid,
    fewer theta values) that still separates every convention.
    """
    grid = grid or evolution_grid(12.0, 64)
    cache = {}
    results = []
    for conv in all_conventions():
        stat = max(anchor_stationarity(conv, th, dt=dt, grid=grid) for th in stationary_thetas)
        drv = max(anchor_driven(conv, th, dt=dt, grid=grid, oracle_cache=cache) for th in driven_thetas)
        results.append(SweepResult(conv, stat, drv, stat <= stationarity_tol and drv <= driven_tol))
    return results
