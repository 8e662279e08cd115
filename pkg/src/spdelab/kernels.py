"""Spatial covariance kernels q(x, y), Gram assembly and Mercer factorization.

A kernel carries three declared exponents used by the diagnostics:

* ``beta``   -- growth exponent: |q(x,y)| <= C (1 + |x|^beta + |y|^beta),
  with beta in [0, 2);
* ``gamma``  -- power-law rate of the double heat-kernel convolution of |q|
  (sup_x integral p_t p_t |q| < C t^gamma), gamma > -1;
* ``gamma0`` -- Holder exponent of q (> 0).

Note on naming: the literature uses "(H1)" for two distinct conditions (a
growth bound on semimartingale characteristics, and the integrated
double-convolution finiteness).  Here the double-convolution condition with
rate gamma is always called (H1a); the growth bound on characteristics is
checked separately via ``check_growth``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import AllEigenvaluesClipped, NonFiniteQuadrature, SingularPoint
from .grids import SpaceGrid
from .heat import full_heat_matrix


# ---------------------------------------------------------------------------
# kernel classes
# ---------------------------------------------------------------------------


def as_points(x) -> np.ndarray:
    """Coerce to an array whose last axis is the coordinate axis.

    Scalars become a single d = 1 point; arrays are taken as-is, so callers
    in d >= 2 must pass an explicit trailing coordinate axis.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim == 0:
        return x.reshape(1)
    return x


def _r2(x, y) -> np.ndarray:
    """Squared euclidean distance over the trailing coordinate axis."""
    x, y = as_points(x), as_points(y)
    return np.sum((x - y) ** 2, axis=-1)


@dataclass(frozen=True, kw_only=True)
class Kernel:
    """Base covariance kernel. Subclasses implement ``evaluate``.

    The declared exponents are keyword-only, so subclass parameters (q0,
    length_scale, ...) bind positionally.
    """

    beta: float = 0.0
    gamma0: float = 1.0
    gamma: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.beta < 2.0):
            raise ValueError(f"beta must be in [0, 2), got {self.beta}")
        if not self.gamma > -1.0:
            raise ValueError(f"gamma must exceed -1, got {self.gamma}")
        if not self.gamma0 > 0.0:
            raise ValueError(f"gamma0 must be positive, got {self.gamma0}")

    # x, y: point arrays with trailing coordinate axis (see ``as_points``)
    def evaluate(self, x, y) -> np.ndarray:
        raise NotImplementedError

    def diagonal(self, x) -> np.ndarray:
        """q(x, x); overridden where a cheaper/analytic form exists."""
        return self.evaluate(x, x)

    @property
    def singular_on_diagonal(self) -> bool:
        return False


@dataclass(frozen=True)
class ConstantKernel(Kernel):
    """q(x, y) = q0: perfectly correlated (spatially flat) noise."""

    q0: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.q0 < 0:
            raise ValueError("q0 must be nonnegative")

    def evaluate(self, x, y):
        shape = np.broadcast_shapes(as_points(x).shape[:-1], as_points(y).shape[:-1])
        return np.full(shape, self.q0)


@dataclass(frozen=True)
class GaussianKernel(Kernel):
    """Homogeneous kernel q(x, y) = amplitude * exp(-|x-y|^2 / (2 l^2)).

    The spectral density is Gaussian; the double heat-kernel convolution is
    bounded, so gamma = 0.
    """

    length_scale: float = 1.0
    amplitude: float = 1.0

    def __post_init__(self):
        super().__post_init__()
        if self.length_scale <= 0 or self.amplitude < 0:
            raise ValueError("length_scale must be positive, amplitude nonnegative")

    def evaluate(self, x, y):
        return self.amplitude * np.exp(-_r2(x, y) / (2.0 * self.length_scale**2))


@dataclass(frozen=True)
class WhiteApproxKernel(Kernel):
    """Mollified white noise: q_eps(x, y) = p_eps(x - y).

    As eps -> 0 this approaches space-time white noise; for t >> eps the
    double convolution behaves like (4 pi t)^(-d/2), i.e. gamma ~ -d/2.
    """

    eps: float = 0.01
    gamma: float = field(default=-0.5, kw_only=True)

    def __post_init__(self):
        super().__post_init__()
        if self.eps <= 0:
            raise ValueError("eps must be positive")

    def evaluate(self, x, y):
        d = as_points(x).shape[-1]
        return (2.0 * np.pi * self.eps) ** (-d / 2.0) * np.exp(-_r2(x, y) / (2.0 * self.eps))


@dataclass(frozen=True)
class BifractionalKernel(Kernel):
    """Mixed-partial kernel of bifractional Brownian motion (d = 1 only).

    q(x, y) = 2^-K d^2/dxdy [ (|x|^2H + |y|^2H)^K - |x-y|^2HK ],  x, y > 0,

    which works out to

        q(x, y) = 2^-K [ 4 H^2 K (K-1) (x^2H + y^2H)^(K-2) (x y)^(2H-1)
                         + 2HK (2HK-1) |x-y|^(2HK-2) ].

    Requires H in (0,1), K in (0,1] and 2HK > 1.  The kernel is singular on
    {x = 0} u {y = 0} u {x = y}; grids must be offset to strictly positive
    coordinates, and Gram diagonals are filled with exact cell averages
    (second differences of the antiderivative R over the cell, which equal a
    bifractional-increment variance and are therefore nonnegative).
    """

    H: float = 0.75
    K: float = 0.8
    gamma: float = field(default=None, kw_only=True)  # type: ignore[assignment]
    gamma0: float = field(default=None, kw_only=True)  # type: ignore[assignment]

    def __post_init__(self):
        if not (0.0 < self.H < 1.0):
            raise ValueError("H must be in (0, 1)")
        if not (0.0 < self.K <= 1.0):
            raise ValueError("K must be in (0, 1]")
        if not 2.0 * self.H * self.K > 1.0:
            raise ValueError("2HK must exceed 1")
        if self.gamma is None:
            object.__setattr__(self, "gamma", self.H * self.K - 1.0)
        if self.gamma0 is None:
            object.__setattr__(self, "gamma0", 2.0 * self.H * self.K - 1.0)
        if abs(self.gamma - (self.H * self.K - 1.0)) > 1e-12:
            raise ValueError("bifractional kernel requires gamma = H*K - 1")
        super().__post_init__()

    @property
    def singular_on_diagonal(self) -> bool:
        return True

    def antiderivative(self, x, y):
        """R(x, y) = 2^-K ((|x|^2H + |y|^2H)^K - |x-y|^2HK): the bifractional
        Brownian covariance whose mixed partial is q."""
        x = np.abs(np.asarray(x, dtype=float))
        y = np.abs(np.asarray(y, dtype=float))
        H, K = self.H, self.K
        return 2.0**-K * ((x ** (2 * H) + y ** (2 * H)) ** K - np.abs(x - y) ** (2 * H * K))

    def evaluate(self, x, y):
        x = as_points(x)[..., 0]
        y = as_points(y)[..., 0]
        bad = (x <= 0) | (y <= 0) | (x == y)
        if np.any(bad):
            raise SingularPoint(
                "bifractional kernel is singular at x=0, y=0 or x=y; offset the grid"
            )
        H, K = self.H, self.K
        g = 2.0 * H * K - 2.0
        smooth = 4.0 * H * H * K * (K - 1.0) * (x ** (2 * H) + y ** (2 * H)) ** (K - 2.0) * (
            x * y
        ) ** (2.0 * H - 1.0)
        singular = 2.0 * H * K * (2.0 * H * K - 1.0) * np.abs(x - y) ** g
        return 2.0**-K * (smooth + singular)

    def diagonal(self, x):
        raise SingularPoint("bifractional kernel diverges on the diagonal")

    def cell_average_diag(self, z: np.ndarray, delta: float) -> np.ndarray:
        """Exact mean of q over the cell [z-delta/2, z+delta/2]^2.

        Equals Var(B^{H,K}(b) - B^{H,K}(a)) / delta^2 >= 0 by the second
        difference of the antiderivative R.
        """
        a = np.asarray(z, dtype=float) - delta / 2.0
        b = np.asarray(z, dtype=float) + delta / 2.0
        var = (
            self.antiderivative(b, b)
            - 2.0 * self.antiderivative(a, b)
            + self.antiderivative(a, a)
        )
        return var / delta**2

    def cell_average_abs_diag(self, z: np.ndarray, delta: float) -> np.ndarray:
        """Mean of |q| over the diagonal cell: exact for the singular term,
        midpoint value for the smooth term."""
        z = np.asarray(z, dtype=float)
        H, K = self.H, self.K
        g = 2.0 * H * K - 2.0
        c_sing = 2.0**-K * 2.0 * H * K * (2.0 * H * K - 1.0)
        sing_avg = c_sing * 2.0 * delta**g / ((g + 1.0) * (g + 2.0))
        smooth = (
            2.0**-K
            * 4.0
            * H
            * H
            * K
            * (K - 1.0)
            * (2.0 * z ** (2 * H)) ** (K - 2.0)
            * z ** (2.0 * (2.0 * H - 1.0))
        )
        return np.abs(smooth) + sing_avg


KERNEL_KINDS = {
    "constant": ConstantKernel,
    "gaussian": GaussianKernel,
    "white_approx": WhiteApproxKernel,
    "bifractional": BifractionalKernel,
}


def make_kernel(kind: str, **params) -> Kernel:
    try:
        cls = KERNEL_KINDS[kind]
    except KeyError:
        raise ValueError(f"unknown kernel kind {kind!r}; one of {sorted(KERNEL_KINDS)}")
    return cls(**params)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def eval_kernel(kernel: Kernel, x, y) -> float:
    """Pointwise kernel value q(x, y); exactly symmetric in (x, y)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValueError("kernel arguments must be finite")
    return float(kernel.evaluate(x, y))


def covariance_matrix(kernel: Kernel, grid: SpaceGrid, absolute: bool = False) -> np.ndarray:
    """Pointwise covariance matrix Q[i, j] = q(z_i, z_j) on the grid nodes.

    This is the density-field covariance used for noise sampling (no cell
    volume factor).  Singular bifractional diagonals are replaced by exact
    cell averages (absolute variant for |q| quadratures).
    """
    nodes = grid.nodes()
    if kernel.singular_on_diagonal:
        if grid.dim != 1:
            raise SingularPoint("bifractional kernel supports d = 1 only")
        z = nodes[:, 0]
        if np.any(z <= 0):
            raise SingularPoint("grid must be offset to strictly positive coordinates")
        n_pts = len(z)
        q = np.zeros((n_pts, n_pts))
        off = ~np.eye(n_pts, dtype=bool)
        xi = np.broadcast_to(z[:, None, None], (n_pts, n_pts, 1))
        yj = np.broadcast_to(z[None, :, None], (n_pts, n_pts, 1))
        q[off] = kernel.evaluate(xi[off], yj[off])
        delta = grid.spacing[0]
        if absolute:
            q = np.abs(q)
            np.fill_diagonal(q, kernel.cell_average_abs_diag(z, delta))
        else:
            np.fill_diagonal(q, kernel.cell_average_diag(z, delta))
        return q
    q = kernel.evaluate(nodes[:, None, :], nodes[None, :, :])
    return np.abs(q) if absolute else q


def assemble_gram(kernel: Kernel, grid: SpaceGrid) -> np.ndarray:
    """Gram matrix M[i, j] = q(z_i, z_j) * cell_volume, exactly symmetric."""
    q = covariance_matrix(kernel, grid)
    m = q * grid.cell_volume
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class GramFactor:
    """Mercer-type square root of a Gram matrix on a grid.

    ``factor`` C satisfies C @ C.T ~ PSD projection of ``gram``; eigenvalues
    below clip_tol * max eigenvalue are clipped to zero and the number of
    clipped negative eigenvalues is surfaced (discretization error made
    observable).
    """

    grid: SpaceGrid | None
    gram: np.ndarray
    factor: np.ndarray
    eigen_clip_count: int
    reconstruction_error: float

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def factorize_sqrt(
    gram: np.ndarray, clip_tol: float = 1e-12, grid: SpaceGrid | None = None
) -> GramFactor:
    """Eigendecomposition square root with small/negative eigenvalue clipping."""
    gram = np.asarray(gram, dtype=np.float64)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be a square matrix")
    if not np.allclose(gram, gram.T, atol=1e-12 * max(1.0, np.abs(gram).max())):
        raise ValueError("gram must be symmetric")
    lam, vec = np.linalg.eigh(0.5 * (gram + gram.T))
    lam_max = lam.max()
    if lam_max <= 0:
        raise AllEigenvaluesClipped("no positive eigenvalue: kernel not PSD on this grid")
    keep = lam >= clip_tol * lam_max
    clipped_negative = int(np.sum(~keep & (lam < 0)))
    lam_kept = lam[keep]
    vec_kept = vec[:, keep]
    factor = vec_kept * np.sqrt(lam_kept)[None, :]
    projection = (vec_kept * lam_kept[None, :]) @ vec_kept.T
    err = float(np.abs(factor @ factor.T - projection).max())
    return GramFactor(
        grid=grid,
        gram=gram,
        factor=factor,
        eigen_clip_count=clipped_negative,
        reconstruction_error=err,
    )


def double_convolution(kernel: Kernel, grid: SpaceGrid, t: float) -> np.ndarray:
    """Grid quadrature of integral p_t(x-z1) p_t(x-z2) |q(z1,z2)| dz1 dz2
    for every grid node x."""
    q_abs = covariance_matrix(kernel, grid, absolute=True)
    k = full_heat_matrix(grid, t)
    return np.einsum("xi,ij,xj->x", k, q_abs, k)


def check_h1a(kernel: Kernel, grid: SpaceGrid, times) -> float:
    """Estimate the (H1a) exponent gamma by log-log regression.

    For each t the double heat-kernel convolution of |q| is computed by grid
    quadrature and the sup is taken over the central half of the grid (edges
    are polluted by box truncation).  Returns the least-squares slope of
    log(sup) against log(t); a valid kernel declaration yields a slope > -1.
    """
    times = np.asarray(sorted(times), dtype=float)
    if np.any(times <= 0):
        raise ValueError("times must be strictly positive")
    if times[-1] / times[0] < 10.0:
        raise ValueError("times must span at least one decade")
    n = grid.n_points
    interior = slice(n // 4, n - n // 4) if grid.dim == 1 else slice(None)
    sups = []
    for t in times:
        vals = double_convolution(kernel, grid, t)
        if not np.all(np.isfinite(vals)):
            raise NonFiniteQuadrature(f"double convolution diverged at t={t}")
        sups.append(vals[interior].max())
    sups = np.asarray(sups)
    if np.any(sups <= 0):
        raise NonFiniteQuadrature("double convolution vanished; cannot regress")
    slope = np.polyfit(np.log(times), np.log(sups), 1)[0]
    return float(slope)


def check_growth(kernel: Kernel, grid: SpaceGrid) -> tuple[bool, float]:
    """Check |q(x,y)| <= C (1 + |x|^beta + |y|^beta) over grid pairs.

    Returns (bounded, constant): the maximal ratio observed on the grid.
    Bifractional diagonals use the nonnegative cell average.
    """
    q = covariance_matrix(kernel, grid, absolute=True)
    nodes = grid.nodes()
    norm = np.linalg.norm(nodes, axis=-1) ** kernel.beta
    denom = 1.0 + norm[:, None] + norm[None, :]
    ratio = q / denom
    constant = float(ratio.max())
    return bool(np.isfinite(constant)), constant
