"""File formats: the QTG1 binary grid container, CSV tables and gnuplot data blocks.

QTG1 layout (all little-endian)::

    b"QTG1" | u32 version | u32 rank | u32 dims[rank] | f64 (min, max)[rank] | f64 (re, im)[prod(dims)]

``max`` is the excluded right end of each periodic axis. Samples are row-major.
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .grids import GridSpec, PhaseGrid
from .oscillator import Trajectory
from .phasespace import FourierImage, WignerField
from .tomography import CharacteristicFunction, Tomogram

MAGIC = b"QTG1"
VERSION = 1
CSV_FMT = "%.17g"


class FormatError(ValueError):
    pass


def write_grid(path, values, axes) -> Path:
    values = np.ascontiguousarray(values, dtype="<c16")
    axes = list(axes)
    if values.ndim != len(axes):
        raise ValueError(f"rank {values.ndim} array with {len(axes)} axes")
    for n, ax in zip(values.shape, axes):
        if n != ax.count:
            raise ValueError(f"axis of {ax.count} points for dimension {n}")
    path = Path(path)
    with path.open("wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, values.ndim))
        fh.write(struct.pack(f"<{values.ndim}I", *values.shape))
        for ax in axes:
            fh.write(struct.pack("<dd", ax.min, ax.max))
        fh.write(values.tobytes(order="C"))
    return path


def read_grid(path):
    """(values, axes) from a QTG1 file."""
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise FormatError(f"{path}: not a QTG1 file")
    version, rank = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise FormatError(f"{path}: unsupported QTG1 version {version}")
    off = 12
    dims = struct.unpack_from(f"<{rank}I", data, off)
    off += 4 * rank
    axes = []
    for n in dims:
        lo, hi = struct.unpack_from("<dd", data, off)
        off += 16
        axes.append(GridSpec(lo, hi, n))
    count = int(np.prod(dims))
    if len(data) - off != 16 * count:
        raise FormatError(f"{path}: payload holds {len(data) - off} bytes, expected {16 * count}")
    values = np.frombuffer(data, dtype="<c16", count=count, offset=off).reshape(dims).astype(complex)
    return values, axes


def save_field(path, field: WignerField | FourierImage) -> Path:
    return write_grid(path, field.values, [field.grid.q, field.grid.p])


def load_wigner(path, tag) -> WignerField:
    values, axes = read_grid(path)
    if len(axes) != 2:
        raise FormatError(f"{path}: expected a rank-2 grid")
    return WignerField(PhaseGrid(*axes), values, tag)


def _savetxt(path, columns, header):
    table = np.column_stack(columns)
    np.savetxt(path, table, fmt=CSV_FMT, delimiter=",", header=",".join(header), comments="")
    return Path(path)


def trajectory_csv(path, traj: Trajectory) -> Path:
    return _savetxt(path, [traj.to_rows()], Trajectory.CSV_HEADER)


def field_csv(path, field: WignerField | FourierImage) -> Path:
    names = ("q", "p") if isinstance(field, WignerField) else ("k", "omega")
    a, b = field.grid.mesh()
    v = field.values
    return _savetxt(path, [a.ravel(), b.ravel(), v.real.ravel(), v.imag.ravel()], names + ("re", "im"))


def _polar_csv(path, angles, axis: GridSpec, values, name):
    aa = np.repeat(np.asarray(angles), axis.count)
    xx = np.tile(axis.points, len(angles))
    return _savetxt(path, [aa, xx, values.real.ravel(), values.imag.ravel()], ("alpha", name, "re", "im"))


def tomogram_csv(path, tomo: Tomogram) -> Path:
    return _polar_csv(path, tomo.angles, tomo.xi, tomo.values, "xi")


def characteristic_csv(path, F: CharacteristicFunction) -> Path:
    return _polar_csv(path, F.angles, F.s, F.values, "s")


def wavefunction_csv(path, grid: GridSpec, psi) -> Path:
    psi = np.asarray(psi)
    return _savetxt(path, [grid.points, psi.real, psi.imag], ("x", "re", "im"))


def gnuplot_blocks(path, field: WignerField | FourierImage, part: str = "re") -> Path:
    """Whitespace-separated ``x y value`` rows, one blank line between rows of x (for splot)."""
    value = {"re": np.real, "im": np.imag, "abs": np.abs}[part](field.values)
    x, y = field.grid.q.points, field.grid.p.points
    with open(path, "w") as fh:
        for i, xv in enumerate(x):
            for j, yv in enumerate(y):
                fh.write(f"{xv:.17g} {yv:.17g} {value[i, j]:.17g}\n")
            fh.write("\n")
    return Path(path)
