"""INI run configuration.

Example::

    [run]
    output = out
    threads = 1

    [scheme]
    name = jordan              ; or repeated ``atom = [theta, weight]`` lines
                               ; plus optional ``density = uniform | nodes([[t, w], ...])``

    [drive]
    omega = 1 + 0.1*cos(t)
    phi = 0.5*cos(0.9*t)

    [grid]
    state = -10 10 512         ; position grid: min max count
    phase = -6 6 256           ; Wigner grid (square)
    xi = -8 8 512
    angles = 128

    [state]
    n = 0
    theta = 0.5                ; omit to use the scheme average
    time = 0

    [evolution]
    target = lambda            ; lambda | tomogram | family
    dt = 1e-3
    t_end = 1
    method = split_step
    k_half = 12
    count = 128
    checkpoint_every = 0

    [tolerances]
    trajectory = 1e-10

Environment overrides: ``QTOMO_OUTPUT`` (run.output), ``QTOMO_THREADS`` (run.threads).
"""
from __future__ import annotations

import configparser
import io
import os
import re
from dataclasses import dataclass
from pathlib import Path

from .expr import ExpressionError, parse_time_expression
from .grids import GridError, GridSpec, PhaseGrid
from .oscillator import DEFAULT_GRID, DEFAULT_TOL, DriveSpec
from .schemes import SchemeError, SymmetrizationScheme, scheme_from_config
from .tomography import DEFAULT_ANGLES, DEFAULT_XI

TARGETS = ("lambda", "tomogram", "family")
_SECTIONS = {
    "run": {"output", "threads"},
    "scheme": None,
    "drive": {"omega", "phi"},
    "grid": {"state", "phase", "xi", "angles"},
    "state": {"n", "theta", "time"},
    "evolution": {"target", "dt", "t_end", "method", "k_half", "count", "checkpoint_every"},
    "tolerances": {"trajectory"},
}


class ConfigError(ValueError):
    pass


def _number_atoms(text: str) -> str:
    """Give repeated ``atom`` keys unique names so configparser keeps them all."""
    out, section, count = [], None, 0
    for line in text.splitlines():
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            section = m.group(1).strip().lower()
        elif section == "scheme":
            a = re.match(r"(\s*)atom(\s*[=:])", line)
            if a:
                count += 1
                line = f"{a.group(1)}atom#{count}{a.group(2)}{line[a.end():]}"
        out.append(line)
    return "\n".join(out)


def _grid(value: str, key: str) -> GridSpec:
    parts = value.split()
    if len(parts) != 3:
        raise ConfigError(f"{key}: expected 'min max count', got {value!r}")
    try:
        return GridSpec(float(parts[0]), float(parts[1]), int(parts[2]))
    except (ValueError, GridError) as exc:
        raise ConfigError(f"{key}: {exc}") from None


def _float(sec, key, default, name):
    try:
        return float(sec.get(key, default))
    except ValueError:
        raise ConfigError(f"{name}.{key}: not a number") from None


def _int(sec, key, default, name):
    try:
        return int(sec.get(key, default))
    except ValueError:
        raise ConfigError(f"{name}.{key}: not an integer") from None


@dataclass(frozen=True)
class RunConfig:
    scheme: SymmetrizationScheme
    scheme_entries: tuple[tuple[str, str], ...]
    omega_src: str
    phi_src: str
    drive: DriveSpec
    state_grid: GridSpec = DEFAULT_GRID
    phase_grid: PhaseGrid = PhaseGrid.square(6.0, 256)
    xi: GridSpec = DEFAULT_XI
    angles: int = DEFAULT_ANGLES
    n: int = 0
    theta: float | None = None
    time: float = 0.0
    target: str = "lambda"
    dt: float = 1e-3
    t_end: float = 1.0
    method: str = "split_step"
    k_half: float = 12.0
    count: int = 128
    checkpoint_every: int = 0
    trajectory_tol: float = DEFAULT_TOL
    output: Path = Path("out")
    threads: int = 1

    def to_ini(self) -> str:
        """Normalized configuration text; loading it reproduces this config."""
        def g(spec):
            return f"{spec.min!r} {spec.max!r} {spec.count}"

        cp = configparser.ConfigParser(interpolation=None)
        cp["run"] = {"output": str(self.output), "threads": str(self.threads)}
        cp["drive"] = {"omega": self.omega_src, "phi": self.phi_src}
        cp["grid"] = {"state": g(self.state_grid), "phase": g(self.phase_grid.q),
                      "xi": g(self.xi), "angles": str(self.angles)}
        state = {"n": str(self.n), "time": repr(self.time)}
        if self.theta is not None:
            state["theta"] = repr(self.theta)
        cp["state"] = state
        cp["evolution"] = {"target": self.target, "dt": repr(self.dt), "t_end": repr(self.t_end),
                           "method": self.method, "k_half": repr(self.k_half), "count": str(self.count),
                           "checkpoint_every": str(self.checkpoint_every)}
        cp["tolerances"] = {"trajectory": repr(self.trajectory_tol)}
        buf = io.StringIO()
        cp.write(buf)
        lines = ["[scheme]"] + [f"{k} = {v}" for k, v in self.scheme_entries] + [""]
        return "\n".join(lines) + "\n" + buf.getvalue()


def parse_config(text: str, env: dict | None = None, require_drive: bool = True) -> RunConfig:
    env = os.environ if env is None else env
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"), strict=True)
    try:
        cp.read_string(_number_atoms(text))
    except configparser.Error as exc:
        raise ConfigError(f"config syntax: {exc}") from None
    for name in cp.sections():
        allowed = _SECTIONS.get(name)
        if name not in _SECTIONS:
            raise ConfigError(f"unknown section [{name}]")
        if allowed is not None:
            for key in cp[name]:
                if key not in allowed:
                    raise ConfigError(f"{name}.{key}: unknown key")

    def section(name):
        return cp[name] if cp.has_section(name) else {}

    entries = tuple((k.split("#")[0], v) for k, v in section("scheme").items()) or (("name", "weyl"),)
    try:
        scheme = scheme_from_config(list(entries), label="custom")
    except SchemeError as exc:
        raise ConfigError(f"scheme: {exc}") from None

    drive_sec = section("drive")
    srcs = {}
    for key in ("omega", "phi"):
        src = drive_sec.get(key, "").strip()
        if not src:
            if require_drive:
                raise ConfigError(f"drive.{key}: required")
            src = "1" if key == "omega" else "0"
        srcs[key] = src
    try:
        omega_fn = parse_time_expression(srcs["omega"])
        phi_fn = parse_time_expression(srcs["phi"])
    except ExpressionError as exc:
        raise ConfigError(f"drive: {exc}") from None
    try:
        drive = DriveSpec(omega_fn, phi_fn)
    except ValueError:
        raise ConfigError(f"drive.omega: Omega(0) must equal 1, got {omega_fn(0.0)!r}") from None

    grid_sec = section("grid")
    state_grid = _grid(grid_sec["state"], "grid.state") if "state" in grid_sec else DEFAULT_GRID
    if "phase" in grid_sec:
        pg = _grid(grid_sec["phase"], "grid.phase")
        phase_grid = PhaseGrid(pg, pg)
    else:
        phase_grid = RunConfig.phase_grid
    xi = _grid(grid_sec["xi"], "grid.xi") if "xi" in grid_sec else DEFAULT_XI
    angles = _int(grid_sec, "angles", DEFAULT_ANGLES, "grid")

    st = section("state")
    theta = _float(st, "theta", "nan", "state") if "theta" in st else None
    if theta is not None and not 0 <= theta <= 1:
        raise ConfigError(f"state.theta: {theta} outside [0, 1]")

    ev = section("evolution")
    target = ev.get("target", "lambda")
    if target not in TARGETS:
        raise ConfigError(f"evolution.target: must be one of {', '.join(TARGETS)}")
    method = ev.get("method", "split_step")
    if method not in ("split_step", "semi_lagrangian"):
        raise ConfigError("evolution.method: must be split_step or semi_lagrangian")
    count = _int(ev, "count", 128, "evolution")
    if count < 8 or count & (count - 1):
        raise ConfigError(f"evolution.count: must be a power of two >= 8, got {count}")
    dt = _float(ev, "dt", 1e-3, "evolution")
    t_end = _float(ev, "t_end", 1.0, "evolution")
    if not dt > 0 or t_end < dt:
        raise ConfigError("evolution: need dt > 0 and t_end >= dt")

    run = section("run")
    output = env.get("QTOMO_OUTPUT") or run.get("output", "out")
    threads_src = env.get("QTOMO_THREADS") or run.get("threads", str(os.cpu_count() or 1))
    try:
        threads = max(1, int(threads_src))
    except ValueError:
        raise ConfigError(f"run.threads: not an integer: {threads_src!r}") from None

    return RunConfig(
        scheme=scheme,
        scheme_entries=entries,
        omega_src=srcs["omega"],
        phi_src=srcs["phi"],
        drive=drive,
        state_grid=state_grid,
        phase_grid=phase_grid,
        xi=xi,
        angles=angles,
        n=_int(st, "n", 0, "state"),
        theta=theta,
        time=_float(st, "time", 0.0, "state"),
        target=target,
        dt=dt,
        t_end=t_end,
        method=method,
        k_half=_float(ev, "k_half", 12.0, "evolution"),
        count=count,
        checkpoint_every=_int(ev, "checkpoint_every", 0, "evolution"),
        trajectory_tol=_float(section("tolerances"), "trajectory", DEFAULT_TOL, "tolerances"),
        output=Path(output),
        threads=threads,
    )


def load_config(path, env: dict | None = None, require_drive: bool = True) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, env, require_drive)
