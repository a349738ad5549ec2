"""Command line entry point: ``qtomo <subcommand> [options]``.

Exit codes: 0 success, 1 validation or numerical failure, 2 usage or config error.
Failures also print a one-line JSON error record on stderr.
"""
from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from . import __version__
from . import evolution as ev
from . import io
from .config import ConfigError, RunConfig, load_config, parse_config
from .expr import ExpressionError
from .grids import GridError, GridSpec
from .oscillator import density_matrix, excited_state, integrate_trajectory
from .phasespace import (
    FourierImage,
    InterpolationError,
    closed_form_lambda_harmonic,
    fourier_image,
    full_wigner,
    inverse_fourier_image,
    partial_wigner,
)
from .schemes import SchemeError, builtin_scheme, characteristic_G, moments
from .tomography import TomographyError, radon_tomogram, tomogram_characteristic


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _common(p):
    p.add_argument("--output", help="output directory (overrides QTOMO_OUTPUT and run.output)")
    p.add_argument("--threads", type=int, help="worker threads (overrides QTOMO_THREADS and run.threads)")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qtomo", description="Ordering-dependent Wigner functions and tomograms.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("scheme", help="print moments and G(s) of a symmetrization scheme")
    p.add_argument("--name", help="builtin scheme: weyl, jordan, born_jordan, point(theta)")
    p.add_argument("--config", help="take the [scheme] section of this config file")
    p.add_argument("--moments", type=int, default=4, help="highest moment order K")
    p.add_argument("--G", dest="g_points", type=float, nargs="*", default=(), metavar="S")

    for name, text in (
        ("states", "export the trajectory, psi_n and rho at state.time"),
        ("wigner", "export the theta or scheme Wigner function and its Fourier image"),
        ("tomogram", "export the tomogram and its characteristic function"),
        ("evolve", "evolve Lambda, a tomogram or a theta family"),
    ):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="INI file or a run manifest (JSON)")
        _common(p)

    p = sub.add_parser("validate", help="run the acceptance suite")
    p.add_argument("--suite", default="all")
    p.add_argument("--report", help="also write a JSON report here")
    return parser


def _load(args) -> RunConfig:
    path = Path(args.config)
    if path.suffix == ".json":
        try:
            text = json.loads(path.read_text())["config"]
        except (OSError, ValueError, KeyError) as exc:
            raise ConfigError(f"cannot read manifest {path}: {exc}") from None
        cfg = parse_config(text)
    else:
        cfg = load_config(path)
    if args.output:
        cfg = dataclasses.replace(cfg, output=Path(args.output))
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = dataclasses.replace(cfg, threads=args.threads)
    cfg.output.mkdir(parents=True, exist_ok=True)
    return cfg


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _manifest(cfg: RunConfig, command: str, outputs: list[Path], extra: dict | None = None) -> Path:
    record = {
        "command": command,
        "version": __version__,
        "config": cfg.to_ini(),
        "sign_convention": str(ev.RESOLVED),
        "tolerances": {
            "trajectory": cfg.trajectory_tol,
            "edge_fraction": ev.EDGE_TOL,
            "max_cell_shift": ev.MAX_CELL_SHIFT,
        },
        "outputs": {p.name: _sha256(p) for p in outputs},
    }
    record.update(extra or {})
    path = cfg.output / "manifest.json"
    path.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
    return path


def _trajectory(cfg: RunConfig, t: float):
    t_end = max(t, 1e-3)
    return integrate_trajectory(cfg.drive, t_end, cfg.trajectory_tol, times=np.array([t]))


def cmd_scheme(args) -> int:
    if bool(args.name) == bool(args.config):
        raise UsageError("give exactly one of --name or --config")
    scheme = builtin_scheme(args.name) if args.name else load_config(args.config, require_drive=False).scheme
    if args.moments < 0:
        raise UsageError("--moments must be non-negative")
    for value in moments(scheme, args.moments).sigma:
        print(f"{value:.17g}")
    for s in args.g_points:
        g = characteristic_G(scheme, s)
        print(f"G({s:g}) = {g.real:.17g} {g.imag:+.17g}i")
    return 0


def cmd_states(args) -> int:
    cfg = _load(args)
    traj = integrate_trajectory(cfg.drive, max(cfg.time, 1e-3), cfg.trajectory_tol,
                                samples=max(2, int(math.ceil(max(cfg.time, 1e-3) / 0.01)) + 1))
    outs = [io.trajectory_csv(cfg.output / "trajectory.csv", traj)]
    at = _trajectory(cfg, cfg.time)
    psi = excited_state(at, cfg.n, 0, cfg.state_grid)
    outs.append(io.wavefunction_csv(cfg.output / f"psi_{cfg.n}.csv", cfg.state_grid, psi))
    rho = density_matrix(at, cfg.n, 0, cfg.state_grid)
    outs.append(io.write_grid(cfg.output / "rho.qtg", rho.entries, [cfg.state_grid, cfg.state_grid]))
    _manifest(cfg, "states", outs)
    return 0


def _wigner(cfg: RunConfig):
    rho = density_matrix(_trajectory(cfg, cfg.time), cfg.n, 0, cfg.state_grid)
    if cfg.theta is not None:
        return partial_wigner(rho, cfg.theta, cfg.phase_grid)
    return full_wigner(rho, cfg.scheme, cfg.phase_grid)


def cmd_wigner(args) -> int:
    cfg = _load(args)
    W = _wigner(cfg)
    outs = [
        io.save_field(cfg.output / "wigner.qtg", W),
        io.field_csv(cfg.output / "wigner.csv", W),
        io.gnuplot_blocks(cfg.output / "wigner.dat", W),
        io.save_field(cfg.output / "lambda.qtg", fourier_image(W)),
    ]
    _manifest(cfg, "wigner", outs)
    return 0


def _angle_axis(angles) -> GridSpec:
    return GridSpec(0.0, math.pi, len(angles))


def cmd_tomogram(args) -> int:
    cfg = _load(args)
    with threadpool_limits(limits=1):
        f = radon_tomogram(_wigner(cfg), cfg.xi, np.pi * np.arange(cfg.angles) / cfg.angles)
    F = tomogram_characteristic(f)
    outs = [
        io.write_grid(cfg.output / "tomogram.qtg", f.values, [_angle_axis(f.angles), f.xi]),
        io.tomogram_csv(cfg.output / "tomogram.csv", f),
        io.characteristic_csv(cfg.output / "characteristic.csv", F),
    ]
    _manifest(cfg, "tomogram", outs)
    return 0


def _initial_lambda(cfg: RunConfig, theta: float, grid) -> FourierImage:
    dual = grid.dual()
    kk, ww = dual.mesh()
    return FourierImage(dual, closed_form_lambda_harmonic(cfg.n, theta, kk, ww), float(theta), grid)


def _run_node(lam0: FourierImage, ecfg: ev.EvolutionConfig, theta: float, every: int, out: Path, label: str):
    written = []
    final = None
    for step, _, values in ev.iter_lambda_theta(lam0, ecfg, theta, every=every or ecfg.steps):
        if every and step and step % every == 0 and step != ecfg.steps:
            written.append(io.write_grid(out / f"checkpoint_{label}_{step:06d}.qtg", values,
                                         [lam0.grid.q, lam0.grid.p]))
        final = values
    if ev.edge_fraction(final) > ev.EDGE_TOL:
        raise ev.EvolutionError(f"{label}: characteristics left the Fourier-image grid")
    return lam0.replace(final), written


def cmd_evolve(args) -> int:
    cfg = _load(args)
    grid = ev.evolution_grid(cfg.k_half, cfg.count)
    nodes = cfg.scheme.nodes if cfg.target == "family" else ((cfg.theta, 1.0),)
    if cfg.target != "family" and cfg.theta is None:
        raise ConfigError(f"state.theta: required for target {cfg.target}")
    ecfg = ev.EvolutionConfig(cfg.drive, tuple(nodes), cfg.dt, cfg.t_end, cfg.method)
    outs: list[Path] = []
    with threadpool_limits(limits=1):
        if cfg.target == "tomogram":
            f0 = radon_tomogram(inverse_fourier_image(_initial_lambda(cfg, cfg.theta, grid)), cfg.xi,
                                np.pi * np.arange(cfg.angles) / cfg.angles)
            fT = ev.evolve_tomogram_theta(f0, ecfg, cfg.theta, grid)
            axes = [_angle_axis(f0.angles), f0.xi]
            outs.append(io.write_grid(cfg.output / "tomogram_initial.qtg", f0.values, axes))
            outs.append(io.write_grid(cfg.output / "tomogram_final.qtg", fT.values, axes))
            outs.append(io.tomogram_csv(cfg.output / "tomogram_final.csv", fT))
            _manifest(cfg, "evolve", outs, {"mass_drift": float(np.abs(fT.masses() - 1).max())})
            return 0
        jobs = [(_initial_lambda(cfg, th, grid), th, f"node{i:02d}") for i, (th, _) in enumerate(nodes)]

        def run(job):
            lam0, th, label = job
            return _run_node(lam0, ecfg, th, cfg.checkpoint_every, cfg.output, label)

        if cfg.threads > 1 and len(jobs) > 1:
            with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
                results = list(pool.map(run, jobs))
        else:
            results = [run(j) for j in jobs]
        finals = []
        for (_, th, label), (lam, written) in zip(jobs, results):
            outs.extend(written)
            outs.append(io.save_field(cfg.output / f"lambda_{label}.qtg", lam))
            finals.append(lam)
        if cfg.target == "family":
            family = ev.FieldFamily(tuple(t for t, _ in nodes), tuple(w for _, w in nodes), tuple(finals),
                                    cfg.t_end)
            full, corr = ev.synthesize_full(family, cfg.scheme, float(cfg.drive.omega_fn(cfg.t_end)) ** 2)
            outs.append(io.save_field(cfg.output / "wigner_full.qtg", full))
            outs.append(io.save_field(cfg.output / "correction.qtg", corr))
        else:
            outs.append(io.save_field(cfg.output / "wigner_final.qtg", inverse_fourier_image(finals[0])))
    _manifest(cfg, "evolve", sorted(outs))
    return 0


def cmd_validate(args) -> int:
    from .validate import SUITES, run_suite

    if args.suite not in SUITES:
        raise UsageError(f"unknown suite {args.suite!r}; choose from {', '.join(SUITES)}")
    results = run_suite(args.suite)
    for r in results:
        print(r.report(), flush=True)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed")
    if args.report:
        record = [
            {"criterion": r.number, "title": r.title, "passed": r.passed, "runtime": r.runtime,
             "budget": r.budget, "error": r.error,
             "checks": [dataclasses.asdict(c) | {"passed": c.passed} for c in r.checks]}
            for r in results
        ]
        Path(args.report).write_text(json.dumps(record, indent=2) + "\n")
    return 0 if ok else 1


COMMANDS = {
    "scheme": cmd_scheme,
    "states": cmd_states,
    "wigner": cmd_wigner,
    "tomogram": cmd_tomogram,
    "evolve": cmd_evolve,
    "validate": cmd_validate,
}


def _fail(kind: str, message: str, code: int) -> int:
    print(json.dumps({"error": kind, "message": message, "exit": code}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail("usage", str(exc), 2)
    except (ConfigError, ExpressionError, SchemeError, GridError) as exc:
        return _fail("config", str(exc), 2)
    except (ev.EvolutionError, TomographyError, InterpolationError, ArithmeticError, ValueError) as exc:
        return _fail("numerical", str(exc), 1)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
