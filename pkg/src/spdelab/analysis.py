"""Holder-exponent measurement and moment statistics of solution ensembles.

The p-th moment of increments is regressed against the lag on log-log axes:
E|u(t+h, x) - u(t, x)|^p ~ h^(p * beta1) in time and ~ |a|^(p * beta2) in
space.  Reported exponents are slope / p with bootstrap confidence
half-widths over replicas.  Predicted suprema come from the declared
exponents: beta1 < min(rho, 1 + gamma) / 2 and beta2 < min(rho, 1 + gamma);
whether simulated solutions saturate these open bounds is an engineering
assumption recorded in the report, not a theorem.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientLags
from .rng import STREAM_ANALYSIS, derive_rng
from .solver import FieldSolution

BOOTSTRAP_RESAMPLES = 200


@dataclass(frozen=True)
class HolderReport:
    variable: str  # "time" or "space"
    p: int
    lags: np.ndarray
    moments: np.ndarray  # E|increment|^p per lag
    exponent: float  # regression slope / p
    half_width: float  # bootstrap confidence half-width of the exponent
    predicted_supremum: float

    @property
    def within(self) -> tuple[float, float]:
        return self.exponent - self.half_width, self.exponent + self.half_width


def _validate_lags(lags: np.ndarray) -> np.ndarray:
    lags = np.asarray(sorted(lags), dtype=float)
    if lags.size < 6:
        raise InsufficientLags(f"need >= 6 lags, got {lags.size}")
    if lags[0] <= 0:
        raise InsufficientLags("lags must be positive")
    if np.log10(lags[-1] / lags[0]) < 1.5:
        raise InsufficientLags("lags must span at least 1.5 decades")
    return lags


def _bootstrap_exponent(
    per_replica: np.ndarray, lags: np.ndarray, p: int, seed: int = 0
) -> tuple[float, float]:
    """Slope/p of log-log fit plus bootstrap half-width over replicas.

    ``per_replica``: (R, n_lags) per-replica mean |increment|^p.
    """
    log_lags = np.log(lags)
    moments = per_replica.mean(axis=0)
    slope = np.polyfit(log_lags, np.log(moments), 1)[0]
    rng = derive_rng(seed, STREAM_ANALYSIS, 0xB0)
    n = per_replica.shape[0]
    slopes = np.empty(BOOTSTRAP_RESAMPLES)
    for b in range(BOOTSTRAP_RESAMPLES):
        idx = rng.integers(0, n, size=n)
        m = per_replica[idx].mean(axis=0)
        slopes[b] = np.polyfit(log_lags, np.log(m), 1)[0]
    half = 1.96 * slopes.std(ddof=1)
    return float(slope / p), float(half / p)


def _ensemble_array(ensemble) -> np.ndarray:
    """(R, steps+1, n_points) array from a replica list or a batched array."""
    if isinstance(ensemble, np.ndarray):
        return ensemble
    if len(ensemble) and isinstance(ensemble[0], FieldSolution):
        return np.stack([sol.values for sol in ensemble], axis=0)
    raise TypeError("ensemble must be an ndarray or a list of FieldSolution")


def time_increment_moments(
    series: np.ndarray, dt: float, lags: np.ndarray, p: int
) -> np.ndarray:
    """Per-replica mean |u(t+h) - u(t)|^p over base times in the middle third.

    ``series``: (R, steps+1) values at one spatial point.  Base times are
    restricted to the middle of [0, T] to suppress the initial layer.
    """
    r, n_t = series.shape
    steps = n_t - 1
    out = np.empty((r, len(lags)))
    for li, h in enumerate(lags):
        k = int(round(h / dt))
        if k < 1 or abs(k * dt - h) > 1e-9:
            raise InsufficientLags(f"lag {h} is not resolvable on the time grid (dt={dt})")
        lo = steps // 3
        hi = max(lo + 1, 2 * steps // 3 - k)
        diffs = series[:, lo + k : hi + k] - series[:, lo:hi]
        out[:, li] = np.mean(np.abs(diffs) ** p, axis=1)
    return out


def space_increment_moments(
    fields: np.ndarray, dx: float, lags: np.ndarray, p: int
) -> np.ndarray:
    """Per-replica mean |u(x+a) - u(x)|^p over base points in the middle third.

    ``fields``: (R, n_points) values at one time (first axis of the grid).
    """
    r, n_x = fields.shape
    out = np.empty((r, len(lags)))
    for li, a in enumerate(lags):
        k = int(round(a / dx))
        if k < 1 or abs(k * dx - a) > 1e-9:
            raise InsufficientLags(f"lag {a} is not resolvable on the space grid (dx={dx})")
        lo = n_x // 3
        hi = max(lo + 1, 2 * n_x // 3)
        if hi + k > n_x:
            raise InsufficientLags(f"lag {a} exceeds the grid from the middle third")
        diffs = fields[:, lo + k : hi + k] - fields[:, lo:hi]
        out[:, li] = np.mean(np.abs(diffs) ** p, axis=1)
    return out


def predicted_suprema(rho: float, gamma: float) -> tuple[float, float]:
    """Predicted (time, space) Holder-exponent suprema from (rho, gamma)."""
    edge = min(rho, 1.0 + gamma)
    return 0.5 * edge, edge


def holder_exponent_time(
    ensemble, x_index: int, p: int, lags, dt: float | None = None, rho: float = 1.0,
    gamma: float = 0.0,
) -> HolderReport:
    """Time-direction Holder exponent at one spatial point."""
    arr = _ensemble_array(ensemble)
    if arr.shape[0] < 2:
        raise ValueError("ensemble must contain at least 2 replicas")
    if dt is None:
        if not isinstance(ensemble, np.ndarray):
            dt = ensemble[0].time_grid.dt
        else:
            raise ValueError("dt is required when passing a raw array")
    lags = _validate_lags(np.asarray(lags))
    per_rep = time_increment_moments(arr[:, :, x_index], dt, lags, p)
    expo, half = _bootstrap_exponent(per_rep, lags, p)
    sup_t, _ = predicted_suprema(rho, gamma)
    return HolderReport(
        "time", p, lags, per_rep.mean(axis=0), expo, half, sup_t
    )


def holder_exponent_space(
    ensemble, t_index: int, p: int, lags, dx: float | None = None, rho: float = 1.0,
    gamma: float = 0.0,
) -> HolderReport:
    """Space-direction Holder exponent along the first axis at one time."""
    arr = _ensemble_array(ensemble)
    if arr.shape[0] < 2:
        raise ValueError("ensemble must contain at least 2 replicas")
    if dx is None:
        if not isinstance(ensemble, np.ndarray):
            dx = ensemble[0].space_grid.spacing[0]
        else:
            raise ValueError("dx is required when passing a raw array")
    lags = _validate_lags(np.asarray(lags))
    per_rep = space_increment_moments(arr[:, t_index, :], dx, lags, p)
    expo, half = _bootstrap_exponent(per_rep, lags, p)
    _, sup_x = predicted_suprema(rho, gamma)
    return HolderReport(
        "space", p, lags, per_rep.mean(axis=0), expo, half, sup_x
    )


def moment_sup(ensemble, p: int) -> tuple[float, float]:
    """max over (t, x) of the replica-average |u|^p, with a bootstrap error bar."""
    if p < 2 or p % 2:
        raise ValueError("p must be an even integer >= 2")
    arr = _ensemble_array(ensemble)
    powered = np.abs(arr) ** p
    mean_field = powered.mean(axis=0)
    flat_idx = np.unravel_index(np.argmax(mean_field), mean_field.shape)
    est = float(mean_field[flat_idx])
    rng = derive_rng(0, STREAM_ANALYSIS, 0xB1)
    r = arr.shape[0]
    vals = np.empty(BOOTSTRAP_RESAMPLES)
    at_max = powered[:, flat_idx[0], flat_idx[1]]
    for b in range(BOOTSTRAP_RESAMPLES):
        vals[b] = at_max[rng.integers(0, r, size=r)].mean()
    return est, float(1.96 * vals.std(ddof=1))


def sample_fbm(hurst: float, n_times: int, t_end: float, n_replicas: int, rng_seed: int) -> np.ndarray:
    """Exact fractional Brownian motion paths via Cholesky of the covariance.

    Returns (n_replicas, n_times + 1) paths starting at 0.  Used as the
    calibration oracle for the Holder regression: the increments have
    E|X(t+h) - X(t)|^2 = h^(2 hurst) exactly, independent of the solver code.
    """
    if not (0.0 < hurst < 1.0):
        raise ValueError("hurst must be in (0, 1)")
    t = np.linspace(0.0, t_end, n_times + 1)[1:]
    s, tt = np.meshgrid(t, t, indexing="ij")
    cov = 0.5 * (s ** (2 * hurst) + tt ** (2 * hurst) - np.abs(s - tt) ** (2 * hurst))
    chol = np.linalg.cholesky(cov + 1e-14 * np.eye(n_times))
    rng = derive_rng(rng_seed, STREAM_ANALYSIS, 0xFB)
    z = rng.standard_normal((n_times, n_replicas))
    paths = (chol @ z).T
    return np.concatenate([np.zeros((n_replicas, 1)), paths], axis=1)
