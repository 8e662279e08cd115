import numpy as np
import pytest

from spdelab import (
    ConstantKernel,
    GaussianKernel,
    SpaceGrid,
    TimeGrid,
    TooFewSamples,
    covariance_matrix,
    density_kde,
    estimate_h,
    factorize_sqrt,
    make_coefficients,
    malliavin_norm,
    nondegeneracy_check,
    sample_noise_lattice,
    silverman_bandwidth,
    solve_mild,
)
from spdelab.kernels import BifractionalKernel


def setup_case(kernel, coeffs, grid, tg, seed=3):
    f = factorize_sqrt(covariance_matrix(kernel, grid), grid=grid)
    lat = sample_noise_lattice(f, tg, seed)
    sol = solve_mild(coeffs, lat)
    return lat, sol


class TestNondegeneracy:
    def test_zero_sigma_degenerate(self):
        grid = SpaceGrid((0.0,), (1.0,), (5,))
        coeffs = make_coefficients(sigma="zero", u0="one")
        ok, witness = nondegeneracy_check(ConstantKernel(1.0), coeffs, grid)
        assert not ok and witness is None

    def test_constant_kernel_everywhere(self):
        grid = SpaceGrid((0.0,), (1.0,), (5,))
        coeffs = make_coefficients(sigma={"name": "affine", "a": 1.0, "b": 0.5}, u0="one")
        ok, witness = nondegeneracy_check(ConstantKernel(1.0), coeffs, grid)
        assert ok
        assert witness[0] == 0.0  # first grid point

    def test_bifractional_sin_witness(self):
        grid = SpaceGrid((0.5,), (2.0,), (16,))
        coeffs = make_coefficients(sigma="identity", u0="sin")
        ok, witness = nondegeneracy_check(
            BifractionalKernel(H=0.75, K=0.8), coeffs, grid
        )
        assert ok
        assert witness[0] == pytest.approx(0.5)  # sin(0.5) != 0 already


class TestEstimateH:
    def test_constant_kernel_constant_sigma_exact(self):
        # sigma' = 0 and b' = 0 make Y = 0, so H(s) = q0 exactly
        grid = SpaceGrid((-3.0,), (3.0,), (31,))
        tg = TimeGrid(t_end=0.2, steps=20)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(ConstantKernel(2.5), coeffs, grid, tg)
        val, se = estimate_h(0.1, 0.2, 0.0, ConstantKernel(2.5), coeffs, sol, lat, 2000, 4)
        assert val == pytest.approx(2.5)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_gauss_hermite_oracle(self):
        # sigma constant: H(s) = E q(x + B_{t-s}, x + B~_{t-s}); independent
        # normals of variance t - s feed a 2-d Gauss-Hermite quadrature oracle
        kernel = GaussianKernel(length_scale=1.0)
        grid = SpaceGrid((-4.0,), (4.0,), (65,))
        tg = TimeGrid(t_end=0.25, steps=25)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(kernel, coeffs, grid, tg)
        s, t, x = 0.05, 0.25, 0.0
        val, se = estimate_h(s, t, x, kernel, coeffs, sol, lat, 40_000, 8)

        nodes, weights = np.polynomial.hermite_e.hermegauss(40)
        sd = np.sqrt(t - s)
        b1 = x + sd * nodes[:, None]
        b2 = x + sd * nodes[None, :]
        q = np.exp(-((b1 - b2) ** 2) / 2.0)
        # hermegauss weights integrate against exp(-z^2/2); normalize by 2 pi
        oracle = float(np.einsum("i,j,ij->", weights, weights, q) / (2 * np.pi))
        assert abs(val - oracle) <= max(4 * se, 0.01)

    def test_zero_sigma_exact_zero(self):
        grid = SpaceGrid((-2.0,), (2.0,), (17,))
        tg = TimeGrid(t_end=0.2, steps=10)
        coeffs = make_coefficients(sigma="zero", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        val, se = estimate_h(0.0, 0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, 500, 1)
        assert val == 0.0 and se == 0.0

    def test_requires_s_before_t(self):
        grid = SpaceGrid((-2.0,), (2.0,), (9,))
        tg = TimeGrid(t_end=0.2, steps=4)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        with pytest.raises(ValueError):
            estimate_h(0.2, 0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, 100, 0)

    def test_common_random_numbers_across_s(self):
        # same seed at different s shares Brownian increments: with a constant
        # kernel and constant sigma the estimates coincide exactly
        grid = SpaceGrid((-3.0,), (3.0,), (31,))
        tg = TimeGrid(t_end=0.2, steps=20)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        v1, _ = estimate_h(0.05, 0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, 1000, 7)
        v2, _ = estimate_h(0.10, 0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, 1000, 7)
        assert v1 == v2 == pytest.approx(1.0)


class TestMalliavinNorm:
    def test_zero_sigma_gives_exact_zero(self):
        grid = SpaceGrid((-2.0,), (2.0,), (17,))
        tg = TimeGrid(t_end=0.2, steps=16)
        coeffs = make_coefficients(sigma="zero", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        s_grid = np.linspace(0.0, 0.2, 9)[:-1]
        est = malliavin_norm(0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, s_grid, 200, 0)
        assert est.f_estimate == 0.0
        assert est.f_std_error == 0.0

    def test_constant_case_integrates_h(self):
        # H(s) = q0 exactly, so F = trapezoid of the constant over the s grid
        grid = SpaceGrid((-3.0,), (3.0,), (31,))
        tg = TimeGrid(t_end=0.2, steps=20)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        s_grid = np.linspace(0.0, 0.2, 11)[:-1]
        est = malliavin_norm(0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat, s_grid, 400, 0)
        assert est.f_estimate == pytest.approx(s_grid[-1] - s_grid[0])
        assert est.integration_error == pytest.approx(0.0, abs=1e-14)
        assert est.positivity_zscore == np.inf

    def test_s_grid_validation(self):
        grid = SpaceGrid((-2.0,), (2.0,), (9,))
        tg = TimeGrid(t_end=0.2, steps=8)
        coeffs = make_coefficients(sigma="one", u0="one")
        lat, sol = setup_case(ConstantKernel(1.0), coeffs, grid, tg)
        with pytest.raises(ValueError):
            malliavin_norm(0.2, 0.0, ConstantKernel(1.0), coeffs, sol, lat,
                           [0.0, 0.05, 0.1], 100, 0)


class TestDensity:
    def test_single_bump_for_degenerate_samples(self):
        samples = np.full(200, 1.5)
        est = density_kde(samples, bandwidth=0.3)
        peak = est.eval_grid[np.argmax(est.density)]
        assert peak == pytest.approx(1.5, abs=0.01)

    def test_standard_normal_oracle(self):
        rng = np.random.default_rng(1)
        samples = rng.standard_normal(10_000)
        est = density_kde(samples)
        true = np.exp(-est.eval_grid**2 / 2) / np.sqrt(2 * np.pi)
        assert np.abs(est.density - true).max() < 0.02

    def test_normalization(self):
        rng = np.random.default_rng(1)
        est = density_kde(rng.exponential(size=500))
        assert est.integral() == pytest.approx(1.0, abs=1e-3)

    def test_too_few_samples(self):
        with pytest.raises(TooFewSamples):
            density_kde(np.zeros(50))

    def test_silverman_positive(self):
        rng = np.random.default_rng(2)
        assert silverman_bandwidth(rng.standard_normal(1000)) > 0
