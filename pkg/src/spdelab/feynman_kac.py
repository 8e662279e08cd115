"""Feynman-Kac Monte Carlo evaluation of the multiplicative heat equation.

The estimator computes

    V(t, x) = E_B[ h(x + B_t) * exp( S - 0.5 * A ) ],
    S = sum_k s(t_k, y_k) dW_k(y_k) + sum_k b(t_k, y_k) dt,
    A = sum_k abar(t_k, y_k) dt,        y_k = x + B_t - B_{t_k},

with the left-point Ito convention on the shared lattice time grid.  The
backward evaluation points come from a single forward Brownian path; since B
is independent of the noise, the quenched integral conditioned on B is an
ordinary sum and no measure change is needed.

Weights are accumulated in log space with a max-shift before exponentiation;
effective sample size and out-of-box rejections are surfaced rather than
silently averaged.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import BoxSizingError, DegenerateWeights, OutOfBox
from .field import BrownianPath, NoiseLattice, _interp_inside
from .grids import TimeGrid
from .heat import apply_heat, full_heat_matrix
from .kernels import Kernel, as_points, covariance_matrix
from .rng import CHUNK_PATHS, STREAM_FK, derive_rng, mean_and_stderr

# Fraction of rejected (out-of-box) paths above which the lattice box is
# considered undersized.
MAX_REJECT_FRACTION = 0.01

SpaceTimeFn = Callable[[float, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class FkEstimate:
    """Monte Carlo estimate of V(t, x) with weight diagnostics."""

    mean: float
    std_error: float
    n_paths: int
    t: float
    x: tuple
    max_log_weight: float
    ess: float
    rejected_paths: int = 0


@dataclass(frozen=True)
class QuenchedModel:
    """Semimartingale model built from one noise lattice realization.

    F(t, x) = int s dW1 + int b dt with multiplier ``s`` and drift ``b``
    (None means s = 1 / b = 0).  The compensator uses the analytic kernel
    diagonal abar = s^2 q(x, x) unless ``abar_diag_grid`` overrides it (used
    by the mollification study, where the smoothed diagonal only exists on
    the grid).
    """

    lattice: NoiseLattice
    kernel: Kernel
    drift: SpaceTimeFn | None = None
    multiplier: SpaceTimeFn | None = None
    abar_diag_grid: np.ndarray | None = None

    @property
    def time_grid(self) -> TimeGrid:
        return self.lattice.time_grid

    @property
    def dim(self) -> int:
        return self.lattice.space_grid.dim

    def multiplier_at(self, t: float, pts: np.ndarray) -> np.ndarray:
        if self.multiplier is None:
            return np.ones(pts.shape[:-1])
        return np.asarray(self.multiplier(t, pts))

    def abar(self, t: float, pts: np.ndarray) -> np.ndarray:
        s = self.multiplier_at(t, pts)
        if self.abar_diag_grid is not None:
            qdiag = _interp_inside(self.lattice.space_grid, self.abar_diag_grid, pts)
        else:
            qdiag = self.kernel.evaluate(pts, pts)
        return s * s * qdiag


@dataclass(frozen=True)
class ConstantCovarianceModel:
    """Spatially flat noise: q(x, y) = q0, so dW_k(y) is one scalar per step."""

    q0: float
    time_grid: TimeGrid
    increments: np.ndarray  # (steps,) realization of the flat noise
    drift: SpaceTimeFn | None = None
    dim: int = 1

    @classmethod
    def sample(
        cls, q0: float, time_grid: TimeGrid, rng_seed: int, drift: SpaceTimeFn | None = None
    ) -> "ConstantCovarianceModel":
        rng = derive_rng(rng_seed, STREAM_FK, 0xC0)
        inc = rng.standard_normal(time_grid.steps) * np.sqrt(q0 * time_grid.dt)
        return cls(q0=q0, time_grid=time_grid, increments=inc, drift=drift)

    @classmethod
    def zeros(
        cls, q0: float, time_grid: TimeGrid, drift: SpaceTimeFn | None = None
    ) -> "ConstantCovarianceModel":
        return cls(q0=q0, time_grid=time_grid, increments=np.zeros(time_grid.steps), drift=drift)

    def abar(self, t: float, pts: np.ndarray) -> np.ndarray:
        return np.full(pts.shape[:-1], self.q0)


Model = QuenchedModel | ConstantCovarianceModel


def _batch_weights(
    model: Model, positions: np.ndarray, x: np.ndarray, m: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exponent pieces for a batch of paths.

    ``positions``: (P, steps+1, d) Brownian positions; returns
    (stoch_integral, abar_integral, valid_mask) arrays of shape (P,).
    """
    dt = model.time_grid.dt
    times = model.time_grid.times()
    n_paths = positions.shape[0]
    stoch = np.zeros(n_paths)
    abar_int = np.zeros(n_paths)
    valid = np.ones(n_paths, dtype=bool)
    terminal = positions[:, m, :]

    if isinstance(model, ConstantCovarianceModel):
        stoch += model.increments[:m].sum()
        abar_int += model.q0 * m * dt
        if model.drift is not None:
            for k in range(m):
                y = x + terminal - positions[:, k, :]
                stoch += np.asarray(model.drift(times[k], y)) * dt
        return stoch, abar_int, valid

    grid = model.lattice.space_grid
    for k in range(m):
        y = x + terminal - positions[:, k, :]
        inside = grid.contains(y)
        valid &= inside
        y_safe = np.clip(y, np.asarray(grid.lower), np.asarray(grid.upper))
        dw = _interp_inside(grid, model.lattice.increments[k], y_safe)
        s = model.multiplier_at(times[k], y_safe)
        stoch += s * dw
        if model.drift is not None:
            stoch += np.asarray(model.drift(times[k], y_safe)) * dt
        abar_int += model.abar(times[k], y_safe) * dt
    return stoch, abar_int, valid


def backward_weight(
    model: Model, path: BrownianPath, x, t: float
) -> tuple[float, float]:
    """(stochastic integral, compensator integral) along one Brownian path."""
    m = model.time_grid.index_of(t)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    stoch, abar_int, valid = _batch_weights(model, path.positions[None, :, :], x, m)
    if not valid[0]:
        raise OutOfBox("backward evaluation point left the lattice box")
    return float(stoch[0]), float(abar_int[0])


def fk_estimate(
    h: Callable[[np.ndarray], np.ndarray],
    model: Model,
    t: float,
    x,
    n_paths: int,
    rng_seed: int,
    include_compensator: bool = True,
) -> FkEstimate:
    """Monte Carlo mean of h(x + B_t) exp(S - A/2) over ``n_paths`` paths.

    Paths are drawn in fixed-size chunks keyed by chunk index, so the result
    is byte-identical regardless of threading.  ``include_compensator=False``
    drops the -A/2 correction (negative-control hook for the
    exponential-martingale test; never use it for estimation).
    """
    if n_paths < 2:
        raise ValueError("n_paths must be >= 2")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if t == 0.0:
        val = float(np.asarray(h(x[None, :])).reshape(()))
        return FkEstimate(val, 0.0, n_paths, 0.0, tuple(x), 0.0, float(n_paths))
    m = model.time_grid.index_of(t)
    d = model.dim
    dt = model.time_grid.dt

    exponents = []
    h_vals = []
    rejected = 0
    n_chunks = (n_paths + CHUNK_PATHS - 1) // CHUNK_PATHS
    for ci in range(n_chunks):
        size = min(CHUNK_PATHS, n_paths - ci * CHUNK_PATHS)
        rng = derive_rng(rng_seed, STREAM_FK, ci)
        inc = rng.standard_normal((CHUNK_PATHS, m, d))[:size] * np.sqrt(dt)
        positions = np.concatenate(
            [np.zeros((size, 1, d)), np.cumsum(inc, axis=1)], axis=1
        )
        stoch, abar_int, valid = _batch_weights(model, positions, x, m)
        e = stoch - 0.5 * abar_int if include_compensator else stoch
        hv = np.asarray(h(x + positions[:, m, :]), dtype=float)
        rejected += int(np.sum(~valid))
        exponents.append(e[valid])
        h_vals.append(hv[valid])
    if rejected > MAX_REJECT_FRACTION * n_paths:
        raise BoxSizingError(
            f"{rejected}/{n_paths} paths left the lattice box; enlarge the grid"
        )
    e = np.concatenate(exponents)
    hv = np.concatenate(h_vals)
    e_max = float(e.max())
    w = np.exp(e - e_max)
    ess = float(w.sum() ** 2 / np.sum(w * w))
    if ess < 10.0:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < 10; weights collapsed")
    mean_s, se_s = mean_and_stderr(hv * w)
    scale = np.exp(e_max)
    return FkEstimate(
        mean=mean_s * scale,
        std_error=se_s * scale,
        n_paths=int(e.size),
        t=float(t),
        x=tuple(x),
        max_log_weight=e_max,
        ess=ess,
        rejected_paths=rejected,
    )


def derive_point_seed(rng_seed: int, index: int) -> int:
    """Stable per-observation-point seed."""
    return int(np.random.SeedSequence(int(rng_seed), spawn_key=(0x0B5, index)).generate_state(1)[0])


def fk_solve_linear(
    h: Callable[[np.ndarray], np.ndarray],
    model: Model,
    points: Sequence[tuple[float, np.ndarray]],
    n_paths: int,
    rng_seed: int,
) -> list[FkEstimate]:
    """fk_estimate at each (t, x) with independently derived seeds."""
    return [
        fk_estimate(h, model, t, x, n_paths, derive_point_seed(rng_seed, i))
        for i, (t, x) in enumerate(points)
    ]


def mollified_model(model: QuenchedModel, eps: float) -> QuenchedModel:
    """Quenched model with the lattice spatially smoothed by p_eps.

    Rows are convolved with the Gaussian of variance eps; the compensator
    diagonal becomes the grid diagonal of K_eps Q K_eps^T (the analytic
    diagonal of the smoothed kernel is not available in closed form).
    """
    if eps == 0.0:
        return model
    grid = model.lattice.space_grid
    smoothed = apply_heat(model.lattice.increments.T, eps, grid).T
    lattice = replace(model.lattice, increments=smoothed)
    q = covariance_matrix(model.kernel, grid)
    k_eps = full_heat_matrix(grid, eps)
    diag = np.einsum("xi,ij,xj->x", k_eps, q, k_eps)
    return replace(model, lattice=lattice, abar_diag_grid=diag)


def mollification_study(
    model: QuenchedModel,
    h: Callable[[np.ndarray], np.ndarray],
    t: float,
    x,
    epsilons: Sequence[float],
    n_paths: int,
    rng_seed: int,
) -> list[tuple[float, FkEstimate]]:
    """FK estimates against decreasing smoothing widths (common B paths)."""
    eps = [float(e) for e in epsilons]
    if any(b > a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be decreasing")
    return [(e, fk_estimate(h, mollified_model(model, e), t, x, n_paths, rng_seed)) for e in eps]


def annealed_constant_mean(
    q0: float,
    t: float,
    steps: int,
    n_outer: int,
    rng_seed: int,
    include_compensator: bool = True,
) -> tuple[float, float]:
    """Annealed mean of exp(w_t - q0 t / 2) over outer flat-noise draws.

    For h = 1 and zero drift the FK weight does not depend on the Brownian
    path, so the annealed estimator reduces to averaging the exponential
    martingale over the flat noise; this is the vectorized version of
    looping ConstantCovarianceModel.sample -> fk_estimate (spot-checked in
    the test suite).  Returns (mean, standard error).
    """
    dt = t / steps
    rng = derive_rng(rng_seed, STREAM_FK, 0xA1)
    inc = rng.standard_normal((n_outer, steps)) * np.sqrt(q0 * dt)
    e = inc.sum(axis=1)
    if include_compensator:
        e = e - 0.5 * q0 * t
    return mean_and_stderr(np.exp(e))


def h_from_points(fn: Callable[[np.ndarray], np.ndarray]) -> Callable[[np.ndarray], np.ndarray]:
    """Adapt a scalar function of the first coordinate to point arrays."""

    def h(pts: np.ndarray) -> np.ndarray:
        pts = as_points(pts)
        return np.asarray(fn(pts[..., 0]))

    return h
