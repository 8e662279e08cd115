"""Sampling of the driving randomness.

Two independent sources feed the solvers:

* ``NoiseLattice`` -- increments of the noise *density field* W1(t, x) on a
  space-time grid: row k holds W1(t_{k+1}, z_j) - W1(t_k, z_j), spatially
  correlated with Cov = dt * q(z_i, z_j) and independent across rows.  The
  factor fed to the sampler must therefore be a square root of the pointwise
  covariance matrix (``kernels.covariance_matrix``), not of the cell-volume
  scaled Gram; the grid solver applies cell-volume weights when integrating.
* ``BrownianPath`` -- d-dimensional standard Brownian trajectories for the
  Feynman-Kac expectation, drawn from a disjoint stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfBox
from .grids import SpaceGrid, TimeGrid
from .kernels import GramFactor
from .rng import STREAM_BROWNIAN, STREAM_NOISE, derive_rng


@dataclass(frozen=True)
class NoiseLattice:
    """One realization of the noise-field increments on a space-time grid."""

    time_grid: TimeGrid
    space_grid: SpaceGrid
    increments: np.ndarray  # (steps, n_points)
    seed: int

    def __post_init__(self):
        expected = (self.time_grid.steps, self.space_grid.n_points)
        if self.increments.shape != expected:
            raise ValueError(f"increments shape {self.increments.shape} != {expected}")


@dataclass(frozen=True)
class BrownianPath:
    """One d-dimensional standard Brownian trajectory, B_0 = 0."""

    time_grid: TimeGrid
    positions: np.ndarray  # (steps + 1, d)
    seed: int

    @property
    def dim(self) -> int:
        return self.positions.shape[1]


def sample_noise_lattice(factor: GramFactor, time_grid: TimeGrid, rng_seed: int) -> NoiseLattice:
    """Sample lattice increments: row k = sqrt(dt) * C @ xi_k, xi_k iid N(0, I)."""
    if factor.grid is None:
        raise ValueError("factor must carry its space grid")
    rng = derive_rng(rng_seed, STREAM_NOISE)
    c = factor.factor
    xi = rng.standard_normal((time_grid.steps, c.shape[1]))
    increments = np.sqrt(time_grid.dt) * xi @ c.T
    return NoiseLattice(time_grid, factor.grid, increments, int(rng_seed))


def zero_lattice(grid: SpaceGrid, time_grid: TimeGrid) -> NoiseLattice:
    """All-zero lattice (deterministic equation through the same code path)."""
    return NoiseLattice(time_grid, grid, np.zeros((time_grid.steps, grid.n_points)), 0)


def sample_brownian_path(d: int, time_grid: TimeGrid, rng_seed: int) -> BrownianPath:
    if d not in (1, 2):
        raise ValueError("d must be 1 or 2")
    rng = derive_rng(rng_seed, STREAM_BROWNIAN)
    inc = rng.standard_normal((time_grid.steps, d)) * np.sqrt(time_grid.dt)
    positions = np.vstack([np.zeros((1, d)), np.cumsum(inc, axis=0)])
    return BrownianPath(time_grid, positions, int(rng_seed))


def sample_brownian_increments(
    d: int, steps: int, dt: float, n_paths: int, rng: np.random.Generator
) -> np.ndarray:
    """Vectorized increments for ``n_paths`` paths: (n_paths, steps, d)."""
    return rng.standard_normal((n_paths, steps, d)) * np.sqrt(dt)


def interpolate_field(grid: SpaceGrid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Multilinear interpolation of grid ``values`` (n_points,) at ``points``.

    ``points`` has shape (..., d).  Raises OutOfBox for points outside the
    grid (interpolation cannot extrapolate; callers size the box).
    """
    points = np.asarray(points, dtype=float)
    flat = points.reshape(-1, grid.dim)
    if not np.all(grid.contains(flat)):
        raise OutOfBox("interpolation point outside the grid box")
    return _interp_inside(grid, values, points)


def _interp_inside(grid: SpaceGrid, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    batch = points.shape[:-1]
    pts = points.reshape(-1, grid.dim)
    vals = np.asarray(values).reshape(grid.points)
    idx = []
    frac = []
    for i in range(grid.dim):
        h = grid.spacing[i]
        u = (pts[:, i] - grid.lower[i]) / h
        i0 = np.clip(np.floor(u).astype(int), 0, grid.points[i] - 2)
        idx.append(i0)
        frac.append(u - i0)
    if grid.dim == 1:
        i0, f = idx[0], frac[0]
        out = vals[i0] * (1.0 - f) + vals[i0 + 1] * f
    else:
        i0, j0 = idx
        fx, fy = frac
        out = (
            vals[i0, j0] * (1 - fx) * (1 - fy)
            + vals[i0 + 1, j0] * fx * (1 - fy)
            + vals[i0, j0 + 1] * (1 - fx) * fy
            + vals[i0 + 1, j0 + 1] * fx * fy
        )
    return out.reshape(batch)


def noise_increment_at(lattice: NoiseLattice, step: int, y) -> float:
    """Multilinear interpolation of lattice row ``step`` at the point ``y``."""
    if not (0 <= step < lattice.time_grid.steps):
        raise IndexError(f"step {step} out of range")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return float(interpolate_field(lattice.space_grid, lattice.increments[step], y))
