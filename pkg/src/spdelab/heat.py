"""Discrete heat-kernel quadrature.

p_t(x) = (2 pi t)^(-d/2) exp(-|x|^2 / 2t) discretized on a uniform grid.
Rows of the quadrature matrix are renormalized to sum to one, which makes the
two defining identities exact on the grid: convolving the constant 1 returns
1, and t = 0 is the identity.  The renormalization also realizes the clamped
boundary treatment (tail mass is redistributed within the box).
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .grids import SpaceGrid


@lru_cache(maxsize=512)
def _axis_heat_matrix(n: int, lo: float, hi: float, t: float) -> np.ndarray:
    """1-d quadrature matrix K[i, j] ~ p_t(x_i - z_j) dz with unit row sums."""
    if t == 0.0:
        return np.eye(n)
    x = np.linspace(lo, hi, n)
    dz = x[1] - x[0]
    diff = x[:, None] - x[None, :]
    mat = np.exp(-(diff**2) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t) * dz
    mat /= mat.sum(axis=1, keepdims=True)
    return mat


def axis_heat_matrices(grid: SpaceGrid, t: float) -> list[np.ndarray]:
    if t < 0:
        raise ValueError("t must be >= 0")
    return [
        _axis_heat_matrix(grid.points[i], grid.lower[i], grid.upper[i], float(t))
        for i in range(grid.dim)
    ]


def apply_heat(values: np.ndarray, t: float, grid: SpaceGrid) -> np.ndarray:
    """Apply the discrete heat semigroup P_t to fields on the grid.

    ``values`` has the flattened grid on its *first* axis; trailing axes (e.g.
    ensemble replicas) are carried along.  The Gaussian kernel is separable,
    so d = 2 applies one axis at a time.
    """
    mats = axis_heat_matrices(grid, t)
    v = np.asarray(values, dtype=np.float64)
    trailing = v.shape[1:]
    v = v.reshape(grid.points + trailing)
    for ax, mat in enumerate(mats):
        v = np.tensordot(mat, np.moveaxis(v, ax, 0), axes=(1, 0))
        v = np.moveaxis(v, 0, ax)
    return v.reshape((grid.n_points,) + trailing)


def full_heat_matrix(grid: SpaceGrid, t: float) -> np.ndarray:
    """Dense (n_points, n_points) heat quadrature matrix (kron over axes)."""
    mats = axis_heat_matrices(grid, t)
    out = mats[0]
    for m in mats[1:]:
        out = np.kron(out, m)
    return out
