"""Grid solver for the nonlinear mild-form heat equation.

Exponential-Euler time stepping: between steps the exact (discretized) heat
semigroup is applied, drift and noise enter through the semigroup with the
left-point Ito convention:

    u_{k+1} = P_dt[ u_k + dt * b(u_k) + sigma(u_k) * dW_k ].

dW_k are density-field increments (Cov = dt * q pointwise); the cell-volume
weight of the space integral lives inside the quadrature matrix P_dt.
A Picard fixed-point solver of the same integral equation provides an
independent discretization for cross-checks.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoConvergence, NonFinite
from .field import NoiseLattice
from .grids import SpaceGrid, TimeGrid
from .heat import apply_heat
from .kernels import GramFactor
from .registry import Coefficients
from .rng import STREAM_ENSEMBLE, derive_rng


@dataclass(frozen=True)
class FieldSolution:
    """Solution values on the space-time grid plus scheme metadata."""

    time_grid: TimeGrid
    space_grid: SpaceGrid
    values: np.ndarray  # (steps + 1, n_points)
    scheme: str
    lattice_seed: int

    def __post_init__(self):
        expected = (self.time_grid.steps + 1, self.space_grid.n_points)
        if self.values.shape != expected:
            raise ValueError(f"values shape {self.values.shape} != {expected}")

    def at_time_index(self, k: int) -> np.ndarray:
        return self.values[k]


def heat_semigroup_apply(field: np.ndarray, t: float, grid: SpaceGrid) -> np.ndarray:
    """Discrete heat semigroup P_t applied to a field sampled on the grid.

    Row-renormalized quadrature: t = 0 is the identity and constants are
    preserved exactly.  ``field`` may carry trailing batch axes.
    """
    if t < 0:
        raise ValueError("t must be >= 0")
    return apply_heat(np.asarray(field, dtype=np.float64), float(t), grid)


def _step(u, b_fn, sigma_fn, dw, dt, grid):
    integrand = u + dt * b_fn(u) + sigma_fn(u) * dw
    return apply_heat(integrand, dt, grid)


def solve_mild(coeffs: Coefficients, lattice: NoiseLattice) -> FieldSolution:
    """Exponential-Euler trajectory driven by one noise lattice."""
    grid = lattice.space_grid
    tg = lattice.time_grid
    u = coeffs.initial_on_grid(grid).astype(np.float64)
    out = np.empty((tg.steps + 1, grid.n_points))
    out[0] = u
    for k in range(tg.steps):
        u = _step(u, coeffs.b, coeffs.sigma, lattice.increments[k], tg.dt, grid)
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"solution overflowed at step {k + 1}; reduce dt")
        out[k + 1] = u
    return FieldSolution(tg, grid, out, scheme="exponential_euler", lattice_seed=lattice.seed)


def picard_solve(
    coeffs: Coefficients,
    lattice: NoiseLattice,
    iterations: int = 20,
    tol: float = 1e-8,
) -> tuple[FieldSolution, int]:
    """Fixed-point iteration of the discrete mild-form map Psi.

    Psi(u)[k] = P_{t_k} u0 + sum_{j<k} P_{t_k - t_j}[ dt b(u_j) + sigma(u_j) dW_j ].

    Starts from u^0[k] = P_{t_k} u0 and stops when the sup-difference between
    successive iterates drops below ``tol``; raises NoConvergence if the
    sup-difference fails to decrease for 3 consecutive iterations.
    Returns (solution, iterations_used).
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    grid = lattice.space_grid
    tg = lattice.time_grid
    u0 = coeffs.initial_on_grid(grid).astype(np.float64)
    steps = tg.steps
    base = np.empty((steps + 1, grid.n_points))
    for k in range(steps + 1):
        base[k] = apply_heat(u0, k * tg.dt, grid)

    u = base.copy()
    prev_diff = np.inf
    stalls = 0
    for it in range(1, iterations + 1):
        forcing = tg.dt * coeffs.b(u[:-1]) + coeffs.sigma(u[:-1]) * lattice.increments
        new = base.copy()
        for k in range(1, steps + 1):
            acc = np.zeros(grid.n_points)
            for j in range(k):
                acc += apply_heat(forcing[j], (k - j) * tg.dt, grid)
            new[k] += acc
        diff = float(np.abs(new - u).max())
        u = new
        if diff < tol:
            sol = FieldSolution(tg, grid, u, scheme="picard", lattice_seed=lattice.seed)
            return sol, it
        if diff >= prev_diff:
            stalls += 1
            if stalls >= 3:
                raise NoConvergence(
                    f"Picard sup-difference stalled at {diff:.3e} after {it} iterations"
                )
        else:
            stalls = 0
        prev_diff = diff
    sol = FieldSolution(tg, grid, u, scheme="picard", lattice_seed=lattice.seed)
    return sol, iterations


def solve_ensemble(
    coeffs: Coefficients,
    factor: GramFactor,
    time_grid: TimeGrid,
    n_replicas: int,
    rng_seed: int,
) -> np.ndarray:
    """Batched exponential-Euler ensemble.

    Returns values of shape (steps + 1, n_points, n_replicas).  All replicas
    are advanced together (one matrix product per step); noise is drawn from
    a single dedicated stream, so the ensemble is deterministic given
    (seed, n_replicas) but is not a concatenation of single-replica runs.
    """
    grid = factor.grid
    if grid is None:
        raise ValueError("factor must carry its space grid")
    rng = derive_rng(rng_seed, STREAM_ENSEMBLE)
    c = factor.factor
    u = np.repeat(coeffs.initial_on_grid(grid)[:, None], n_replicas, axis=1)
    out = np.empty((time_grid.steps + 1, grid.n_points, n_replicas))
    out[0] = u
    sqdt = np.sqrt(time_grid.dt)
    for k in range(time_grid.steps):
        xi = rng.standard_normal((c.shape[1], n_replicas))
        dw = sqdt * (c @ xi)
        u = _step(u, coeffs.b, coeffs.sigma, dw, time_grid.dt, grid)
        if not np.all(np.isfinite(u)):
            raise NonFinite(f"ensemble overflowed at step {k + 1}; reduce dt")
        out[k + 1] = u
    return out
