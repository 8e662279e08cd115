import numpy as np
import pytest

from spdelab import (
    AllEigenvaluesClipped,
    BifractionalKernel,
    ConstantKernel,
    GaussianKernel,
    SingularPoint,
    SpaceGrid,
    WhiteApproxKernel,
    assemble_gram,
    check_growth,
    check_h1a,
    covariance_matrix,
    double_convolution,
    eval_kernel,
    factorize_sqrt,
    make_kernel,
)


def bifrac():
    return BifractionalKernel(H=0.75, K=0.8)


def mixed_partial_fd(kernel, x, y, step=1e-4):
    """Symmetric second finite difference of the antiderivative R(x, y)."""
    r = kernel.antiderivative
    return (
        r(x + step, y + step) - r(x + step, y - step)
        - r(x - step, y + step) + r(x - step, y - step)
    ) / (4.0 * step * step)


class TestEval:
    def test_constant_everywhere(self):
        k = ConstantKernel(q0=1.0)
        assert eval_kernel(k, 0.3, -2.0) == 1.0

    def test_gaussian_at_zero_lag(self):
        k = GaussianKernel(length_scale=1.0)
        assert eval_kernel(k, 0.7, 0.7) == 1.0

    def test_bifractional_matches_finite_difference_oracle(self):
        k = bifrac()
        got = eval_kernel(k, 1.0, 1.5)
        want = mixed_partial_fd(k, 1.0, 1.5)
        # agreement to 4 significant digits
        assert got == pytest.approx(want, rel=1e-4)

    def test_bifractional_fd_oracle_on_many_points(self):
        k = bifrac()
        xs = np.linspace(0.5, 2.0, 8)
        for x in xs:
            for y in xs:
                if x == y:
                    continue
                assert eval_kernel(k, x, y) == pytest.approx(
                    mixed_partial_fd(k, x, y), rel=1e-3
                )

    def test_symmetry(self):
        for k in (ConstantKernel(2.0), GaussianKernel(0.7), WhiteApproxKernel(0.05), bifrac()):
            for x, y in [(0.4, 1.3), (1.0, 2.0), (0.6, 0.9)]:
                assert eval_kernel(k, x, y) == eval_kernel(k, y, x)

    def test_bifractional_singular_points(self):
        k = bifrac()
        for x, y in [(0.0, 1.0), (1.0, 0.0), (1.2, 1.2)]:
            with pytest.raises(SingularPoint):
                eval_kernel(k, x, y)

    def test_validation(self):
        with pytest.raises(ValueError):
            ConstantKernel(q0=1.0, beta=2.0)
        with pytest.raises(ValueError):
            ConstantKernel(q0=1.0, gamma=-1.0)
        with pytest.raises(ValueError):
            BifractionalKernel(H=0.5, K=0.8)  # 2HK <= 1
        with pytest.raises(ValueError):
            BifractionalKernel(H=1.2, K=0.8)
        with pytest.raises(ValueError):
            make_kernel("nope")

    def test_bifractional_declared_exponents(self):
        k = bifrac()
        assert k.gamma == pytest.approx(0.75 * 0.8 - 1.0)
        assert k.gamma0 == pytest.approx(2 * 0.75 * 0.8 - 1.0)


class TestGram:
    def test_constant_all_ones(self):
        grid = SpaceGrid((0.0,), (2.0,), (3,))  # spacing 1
        m = assemble_gram(ConstantKernel(q0=1.0), grid)
        assert np.array_equal(m, np.ones((3, 3)))

    def test_gaussian_diagonal_constant(self):
        grid = SpaceGrid((0.0,), (1.0,), (5,))
        m = assemble_gram(GaussianKernel(length_scale=0.5), grid)
        assert np.allclose(np.diag(m), m[0, 0])
        assert np.array_equal(m, m.T)

    def test_bifractional_nearly_psd(self):
        grid = SpaceGrid((0.5,), (2.0,), (8,))
        m = assemble_gram(bifrac(), grid)
        lam = np.linalg.eigvalsh(m)
        assert lam.min() >= -1e-8 * lam.max()

    def test_bifractional_diagonal_cell_average_nonnegative(self):
        grid = SpaceGrid((0.5,), (2.0,), (16,))
        q = covariance_matrix(bifrac(), grid)
        assert np.all(np.diag(q) >= 0)


class TestFactorize:
    def test_identity(self):
        f = factorize_sqrt(np.eye(4))
        assert np.allclose(f.factor @ f.factor.T, np.eye(4), atol=1e-14)
        assert f.reconstruction_error == 0.0
        assert f.eigen_clip_count == 0

    def test_rank_one_all_ones(self):
        f = factorize_sqrt(np.ones((3, 3)))
        assert f.rank == 1
        assert np.allclose(f.factor @ f.factor.T, np.ones((3, 3)), atol=1e-12)

    def test_gaussian_reconstruction(self):
        grid = SpaceGrid((0.0,), (2.0,), (16,))
        m = assemble_gram(GaussianKernel(length_scale=0.5), grid)
        f = factorize_sqrt(m, clip_tol=1e-12)
        assert f.reconstruction_error < 1e-10

    def test_all_clipped(self):
        with pytest.raises(AllEigenvaluesClipped):
            factorize_sqrt(-np.eye(3))

    def test_psd_projection_property(self):
        grid = SpaceGrid((0.5,), (2.0,), (12,))
        m = assemble_gram(bifrac(), grid)
        f = factorize_sqrt(m)
        lam = np.linalg.eigvalsh(f.factor @ f.factor.T)
        assert lam.min() >= -1e-10 * lam.max()


class TestH1a:
    def test_constant_gamma_zero(self):
        grid = SpaceGrid((-3.0,), (3.0,), (65,))
        gamma = check_h1a(ConstantKernel(q0=1.0), grid, np.geomspace(1e-3, 2e-2, 8))
        assert abs(gamma) <= 0.05

    def test_gaussian_matches_single_convolution_identity(self):
        # for a stationary kernel g(x - y) the double convolution equals
        # int p_{2t}(w) g(w) dw, which is (1 + 2t/l^2)^(-1/2) for the
        # Gaussian kernel with length scale l
        k = GaussianKernel(length_scale=1.0)
        grid = SpaceGrid((-6.0,), (6.0,), (241,))
        mid = grid.n_points // 2
        for t in (0.1, 0.5):
            got = double_convolution(k, grid, t)[mid]
            want = (1.0 + 2.0 * t) ** -0.5
            assert got == pytest.approx(want, rel=0.01)

    def test_times_must_span_a_decade(self):
        grid = SpaceGrid((-1.0,), (1.0,), (17,))
        with pytest.raises(ValueError):
            check_h1a(ConstantKernel(1.0), grid, [0.1, 0.2, 0.5])


class TestGrowth:
    def test_constant(self):
        grid = SpaceGrid((-1.0,), (1.0,), (9,))
        ok, c = check_growth(ConstantKernel(q0=1.0), grid)
        assert ok
        assert c <= 1.0 + 1e-12

    def test_gaussian_bounded(self):
        grid = SpaceGrid((-2.0,), (2.0,), (17,))
        ok, c = check_growth(GaussianKernel(length_scale=1.0), grid)
        assert ok and c <= 1.0 + 1e-12

    def test_bifractional_bounded_on_offset_grid(self):
        grid = SpaceGrid((0.1,), (4.0,), (40,))
        ok, c = check_growth(bifrac(), grid)
        assert ok and np.isfinite(c)
