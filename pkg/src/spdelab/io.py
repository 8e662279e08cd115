"""Binary persistence for matrices, noise lattices and field solutions.

Formats are little-endian with a short struct header followed by row-major
float64 data, so the grid solver and the Feynman-Kac estimator can provably
consume the same noise realization from disk.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .field import NoiseLattice
from .grids import SpaceGrid, TimeGrid
from .solver import FieldSolution

_MAGIC_MATRIX = b"SPGM"
_MAGIC_LATTICE = b"SPLT"
_MAGIC_SOLUTION = b"SPFS"
_VERSION = 1


def write_matrix(path, matrix: np.ndarray) -> None:
    """Dump a 2-d float64 matrix: magic, version, rows, cols, row-major body."""
    matrix = np.ascontiguousarray(matrix, dtype="<f8")
    if matrix.ndim != 2:
        raise ValueError("matrix must be 2-d")
    with open(path, "wb") as fh:
        fh.write(_MAGIC_MATRIX)
        fh.write(struct.pack("<III", _VERSION, *matrix.shape))
        fh.write(matrix.tobytes())


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC_MATRIX:
            raise ValueError(f"{path}: not a matrix file")
        _, rows, cols = struct.unpack("<III", fh.read(12))
        data = np.frombuffer(fh.read(rows * cols * 8), dtype="<f8")
    return data.reshape(rows, cols).copy()


def _pack_grids(space: SpaceGrid, time: TimeGrid, seed: int) -> bytes:
    parts = [struct.pack("<I", space.dim)]
    for i in range(space.dim):
        parts.append(struct.pack("<Idd", space.points[i], space.lower[i], space.upper[i]))
    parts.append(struct.pack("<Qdq", time.steps, time.dt, seed))
    return b"".join(parts)


def _unpack_grids(fh) -> tuple[SpaceGrid, TimeGrid, int]:
    (dim,) = struct.unpack("<I", fh.read(4))
    points, lower, upper = [], [], []
    for _ in range(dim):
        n, lo, hi = struct.unpack("<Idd", fh.read(20))
        points.append(n)
        lower.append(lo)
        upper.append(hi)
    steps, dt, seed = struct.unpack("<Qdq", fh.read(24))
    space = SpaceGrid(tuple(lower), tuple(upper), tuple(points))
    time = TimeGrid(t_end=dt * steps, steps=steps)
    return space, time, seed


def write_lattice(path, lattice: NoiseLattice) -> None:
    with open(path, "wb") as fh:
        fh.write(_MAGIC_LATTICE)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(_pack_grids(lattice.space_grid, lattice.time_grid, lattice.seed))
        fh.write(np.ascontiguousarray(lattice.increments, dtype="<f8").tobytes())


def read_lattice(path) -> NoiseLattice:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC_LATTICE:
            raise ValueError(f"{path}: not a lattice file")
        struct.unpack("<I", fh.read(4))
        space, time, seed = _unpack_grids(fh)
        body = np.frombuffer(fh.read(time.steps * space.n_points * 8), dtype="<f8")
    return NoiseLattice(time, space, body.reshape(time.steps, space.n_points).copy(), seed)


def write_solution(path, solution: FieldSolution) -> None:
    """Binary trajectory plus a JSON sidecar with scheme metadata."""
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(_MAGIC_SOLUTION)
        fh.write(struct.pack("<I", _VERSION))
        fh.write(_pack_grids(solution.space_grid, solution.time_grid, solution.lattice_seed))
        fh.write(np.ascontiguousarray(solution.values, dtype="<f8").tobytes())
    sidecar = {
        "scheme": solution.scheme,
        "lattice_seed": solution.lattice_seed,
        "dt": solution.time_grid.dt,
        "steps": solution.time_grid.steps,
        "spacing": list(solution.space_grid.spacing),
    }
    path.with_suffix(path.suffix + ".json").write_text(json.dumps(sidecar, indent=2))


def read_solution(path) -> FieldSolution:
    path = Path(path)
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC_SOLUTION:
            raise ValueError(f"{path}: not a solution file")
        struct.unpack("<I", fh.read(4))
        space, time, seed = _unpack_grids(fh)
        body = np.frombuffer(fh.read((time.steps + 1) * space.n_points * 8), dtype="<f8")
    sidecar = json.loads(path.with_suffix(path.suffix + ".json").read_text())
    return FieldSolution(
        time,
        space,
        body.reshape(time.steps + 1, space.n_points).copy(),
        scheme=sidecar.get("scheme", "unknown"),
        lattice_seed=seed,
    )
