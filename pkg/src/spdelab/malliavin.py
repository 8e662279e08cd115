"""Malliavin-calculus diagnostics via the double-Brownian representation.

The squared Malliavin-derivative norm of the solution at (t, x) equals
F = int_0^t H(s) ds with

    H(s) = E_{B,B~}[ q(x+B_{t-s}, x+B~_{t-s})
                     * sigma(u(s, x+B_{t-s})) sigma(u(s, x+B~_{t-s}))
                     * exp(Y(s,t;B) + Y(s,t;B~)) ],

    Y(s,t;B) = sum_r [ b'(u) dt + sigma'(u) dW_1(r, y_r)
                       - 0.5 sigma'(u)^2 q(y_r, y_r) dt ],
    y_r = x + B_{t-s} - B_{r-s},

where u comes from a precomputed grid solution on the same lattice (quenched
coupling) and dW_1 from that lattice.  F is estimated through this
representation, never by differentiating the solver.  Per-s estimates of
H(s) may be negative (q can change sign off-diagonal); only the final F is a
squared norm.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoxSizingError, DegenerateWeights, TooFewSamples
from .field import NoiseLattice, _interp_inside
from .grids import SpaceGrid
from .kernels import BifractionalKernel, Kernel
from .registry import Coefficients
from .rng import CHUNK_PATHS, STREAM_MALLIAVIN, derive_rng, mean_and_stderr
from .solver import FieldSolution

MAX_REJECT_FRACTION = 0.01


@dataclass(frozen=True)
class MalliavinEstimate:
    """Trapezoid estimate of F = int_0^t H(s) ds with per-s diagnostics."""

    t: float
    x: tuple
    h_values: list  # (s, estimate, std_error) triples
    f_estimate: float
    f_std_error: float
    integration_error: float
    n_paths: int

    @property
    def positivity_zscore(self) -> float:
        if self.f_std_error == 0.0:
            return np.inf if self.f_estimate > 0 else 0.0
        return self.f_estimate / self.f_std_error


@dataclass(frozen=True)
class DensityEstimate:
    """Gaussian kernel density estimate of the law of u(t, x)."""

    n_samples: int
    bandwidth: float
    eval_grid: np.ndarray
    density: np.ndarray

    def integral(self) -> float:
        return float(np.trapezoid(self.density, self.eval_grid))


def nondegeneracy_check(
    kernel: Kernel, coeffs: Coefficients, grid: SpaceGrid
) -> tuple[bool, np.ndarray | None]:
    """First grid point with q(x0, x0) > 0 and sigma(u0(x0)) != 0, if any."""
    nodes = grid.nodes()
    if isinstance(kernel, BifractionalKernel):
        qdiag = kernel.cell_average_diag(nodes[:, 0], grid.spacing[0])
    else:
        qdiag = np.asarray(kernel.evaluate(nodes, nodes))
    sig = np.asarray(coeffs.sigma(coeffs.initial_at(nodes)))
    ok = (qdiag > 0) & (sig != 0)
    idx = np.flatnonzero(ok)
    if idx.size == 0:
        return False, None
    return True, nodes[idx[0]]


def _kernel_diag(kernel: Kernel, pts: np.ndarray) -> np.ndarray:
    return np.asarray(kernel.evaluate(pts, pts))


def estimate_h(
    s: float,
    t: float,
    x,
    kernel: Kernel,
    coeffs: Coefficients,
    grid_solution: FieldSolution,
    lattice: NoiseLattice,
    n_paths: int,
    rng_seed: int,
) -> tuple[float, float]:
    """Monte Carlo estimate of H(s) over independent (B, B~) pairs.

    Increments are always drawn up to the index of t and truncated to the
    span [s, t]; calling with the same seed at different s therefore shares
    paths (common random numbers), which the continuity diagnostics rely on.
    """
    tg = lattice.time_grid
    grid = lattice.space_grid
    i_s = tg.index_of(s)
    i_t = tg.index_of(t)
    if not i_s < i_t:
        raise ValueError("requires 0 <= s < t on the lattice time grid")
    m = i_t - i_s
    dt = tg.dt
    d = grid.dim
    x = np.atleast_1d(np.asarray(x, dtype=float))

    sigma_is_zero = coeffs.sigma.is_zero
    values = []
    log_weights = []
    rejected = 0
    n_chunks = (n_paths + CHUNK_PATHS - 1) // CHUNK_PATHS
    for ci in range(n_chunks):
        size = min(CHUNK_PATHS, n_paths - ci * CHUNK_PATHS)
        rng = derive_rng(rng_seed, STREAM_MALLIAVIN, ci)
        inc = rng.standard_normal((CHUNK_PATHS, 2, i_t, d))[:size, :, :m, :] * np.sqrt(dt)
        pos = np.concatenate([np.zeros((size, 2, 1, d)), np.cumsum(inc, axis=2)], axis=2)
        terminal = pos[:, :, m, :]  # (P, 2, d)

        y_exp = np.zeros((size, 2))
        valid = np.ones(size, dtype=bool)
        for j in range(m):
            y = x + terminal - pos[:, :, j, :]  # (P, 2, d)
            inside = grid.contains(y.reshape(-1, d)).reshape(size, 2)
            valid &= inside.all(axis=1)
            y_safe = np.clip(y, np.asarray(grid.lower), np.asarray(grid.upper))
            u_val = _interp_inside(grid, grid_solution.values[i_s + j], y_safe)
            dw = _interp_inside(grid, lattice.increments[i_s + j], y_safe)
            sp = coeffs.sigma.d(u_val)
            y_exp += coeffs.b.d(u_val) * dt + sp * dw - 0.5 * sp * sp * _kernel_diag(
                kernel, y_safe
            ) * dt

        end = x + terminal
        inside = grid.contains(end.reshape(-1, d)).reshape(size, 2)
        valid &= inside.all(axis=1)
        end_safe = np.clip(end, np.asarray(grid.lower), np.asarray(grid.upper))
        u_s = _interp_inside(grid, grid_solution.values[i_s], end_safe)
        sig = coeffs.sigma(u_s)
        q_cross = np.asarray(kernel.evaluate(end_safe[:, 0, :], end_safe[:, 1, :]))
        log_w = y_exp.sum(axis=1)
        g = q_cross * sig[:, 0] * sig[:, 1] * np.exp(log_w)

        rejected += int(np.sum(~valid))
        values.append(g[valid])
        log_weights.append(log_w[valid])

    if rejected > MAX_REJECT_FRACTION * n_paths:
        raise BoxSizingError(
            f"{rejected}/{n_paths} path pairs left the lattice box; enlarge the grid"
        )
    vals = np.concatenate(values)
    if sigma_is_zero:
        return 0.0, 0.0
    lw = np.concatenate(log_weights)
    w = np.exp(lw - lw.max())
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if ess < 10.0:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < 10 in H(s) estimate")
    return mean_and_stderr(vals)


def malliavin_norm(
    t: float,
    x,
    kernel: Kernel,
    coeffs: Coefficients,
    grid_solution: FieldSolution,
    lattice: NoiseLattice,
    s_grid,
    n_paths: int,
    rng_seed: int,
) -> MalliavinEstimate:
    """Trapezoid rule over H(s) estimates on ``s_grid`` subset of [0, t).

    Each s gets an independently derived seed so the combined standard error
    follows from per-s errors.  The reported integration error is a
    Richardson-style estimate (full trapezoid vs every-other-point
    trapezoid).
    """
    s_grid = np.asarray(sorted(s_grid), dtype=float)
    if s_grid.size < 8:
        raise ValueError("s_grid must contain at least 8 points")
    if s_grid[0] < 0 or s_grid[-1] >= t:
        raise ValueError("s_grid must lie in [0, t)")
    x = np.atleast_1d(np.asarray(x, dtype=float))

    h_values = []
    for i, s in enumerate(s_grid):
        seed_i = int(
            np.random.SeedSequence(int(rng_seed), spawn_key=(0x4A, i)).generate_state(1)[0]
        )
        val, se = estimate_h(
            s, t, x, kernel, coeffs, grid_solution, lattice, n_paths, seed_i
        )
        h_values.append((float(s), float(val), float(se)))

    vals = np.array([v for _, v, _ in h_values])
    errs = np.array([e for _, _, e in h_values])
    f_est = float(np.trapezoid(vals, s_grid))
    # trapezoid weights for independent per-s errors
    w = np.zeros_like(s_grid)
    w[1:] += 0.5 * np.diff(s_grid)
    w[:-1] += 0.5 * np.diff(s_grid)
    f_se = float(np.sqrt(np.sum((w * errs) ** 2)))
    # every-other-point trapezoid over the same interval (keep the endpoint)
    coarse_idx = np.unique(np.r_[np.arange(0, s_grid.size, 2), s_grid.size - 1])
    coarse = float(np.trapezoid(vals[coarse_idx], s_grid[coarse_idx]))
    integ_err = abs(f_est - coarse)
    return MalliavinEstimate(
        t=float(t),
        x=tuple(x),
        h_values=h_values,
        f_estimate=f_est,
        f_std_error=f_se,
        integration_error=integ_err,
        n_paths=int(n_paths),
    )


def silverman_bandwidth(samples: np.ndarray) -> float:
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    std = samples.std(ddof=1)
    q75, q25 = np.percentile(samples, [75, 25])
    iqr = q75 - q25
    scale = min(std, iqr / 1.34) if iqr > 0 else std
    if scale == 0.0:
        scale = max(abs(samples[0]), 1.0) * 1e-3  # degenerate sample set
    return float(0.9 * scale * n ** (-0.2))


def density_kde(
    samples, bandwidth: float | None = None, eval_grid: np.ndarray | None = None
) -> DensityEstimate:
    """Gaussian KDE, normalized to unit mass on the evaluation grid.

    ``bandwidth=None`` applies the Silverman rule; the default grid spans the
    samples plus five bandwidths on each side.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 100:
        raise TooFewSamples(f"need >= 100 samples, got {samples.size}")
    h = float(bandwidth) if bandwidth is not None else silverman_bandwidth(samples)
    if h <= 0:
        raise ValueError("bandwidth must be positive")
    if eval_grid is None:
        eval_grid = np.linspace(samples.min() - 5 * h, samples.max() + 5 * h, 512)
    eval_grid = np.asarray(eval_grid, dtype=float)
    z = (eval_grid[:, None] - samples[None, :]) / h
    dens = np.exp(-0.5 * z * z).mean(axis=1) / (h * np.sqrt(2 * np.pi))
    mass = np.trapezoid(dens, eval_grid)
    if mass <= 0:
        raise ValueError("density integrated to zero on the evaluation grid")
    dens = dens / mass
    return DensityEstimate(
        n_samples=samples.size, bandwidth=h, eval_grid=eval_grid, density=dens
    )
