"""Space and time grids.

The underlying problem lives on all of R^d; the space grid is a box
truncation.  Boxes must be sized so that heat-kernel mass outside the box is
negligible at the largest simulated time (see ``heat_tail_mass``).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class SpaceGrid:
    """Uniform tensor grid on a box in d = 1 or 2 dimensions.

    ``lower``/``upper`` are per-axis bounds, ``points`` the number of nodes
    per axis (>= 2).  Nodes include both endpoints; the cell volume is the
    product of the per-axis spacings.
    """

    lower: tuple[float, ...]
    upper: tuple[float, ...]
    points: tuple[int, ...]

    def __post_init__(self):
        if not (1 <= self.dim <= 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if len(self.upper) != self.dim or len(self.points) != self.dim:
            raise ValueError("lower/upper/points must have the same length")
        for lo, hi, n in zip(self.lower, self.upper, self.points):
            if n < 2:
                raise ValueError("points per axis must be >= 2")
            if not hi > lo:
                raise ValueError("upper must exceed lower on every axis")

    @property
    def dim(self) -> int:
        return len(self.lower)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(
            (hi - lo) / (n - 1) for lo, hi, n in zip(self.lower, self.upper, self.points)
        )

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def n_points(self) -> int:
        return int(np.prod(self.points))

    def axis(self, i: int) -> np.ndarray:
        return np.linspace(self.lower[i], self.upper[i], self.points[i])

    def nodes(self) -> np.ndarray:
        """All grid nodes as an (n_points, dim) array, row-major over axes."""
        axes = [self.axis(i) for i in range(self.dim)]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=-1)

    def contains(self, pts: np.ndarray) -> np.ndarray:
        """Boolean mask of points inside the box (inclusive)."""
        pts = np.atleast_2d(pts)
        lo = np.asarray(self.lower)
        hi = np.asarray(self.upper)
        return np.all((pts >= lo) & (pts <= hi), axis=-1)


@dataclass(frozen=True)
class TimeGrid:
    """Uniform time grid on [0, t_end] with ``steps`` intervals."""

    t_end: float
    steps: int

    def __post_init__(self):
        if self.t_end <= 0:
            raise ValueError("t_end must be positive")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")

    @property
    def dt(self) -> float:
        return self.t_end / self.steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.t_end, self.steps + 1)

    def index_of(self, t: float) -> int:
        """Index of a time that must lie (numerically) on the grid."""
        k = round(t / self.dt)
        if not (0 <= k <= self.steps) or abs(k * self.dt - t) > 1e-9 * max(1.0, self.t_end):
            raise ValueError(f"t={t} is not on the time grid (dt={self.dt})")
        return k


def heat_tail_mass(grid: SpaceGrid, t: float, x: np.ndarray) -> float:
    """Gaussian mass of p_t(x - .) outside the grid box.

    Used to verify that the box truncation bias is below tolerance at the
    largest simulated time.
    """
    from math import erf, sqrt

    x = np.atleast_1d(np.asarray(x, dtype=float))
    inside = 1.0
    for i in range(grid.dim):
        a = (grid.lower[i] - x[i]) / sqrt(2.0 * t)
        b = (grid.upper[i] - x[i]) / sqrt(2.0 * t)
        inside *= 0.5 * (erf(b) - erf(a))
    return 1.0 - inside
