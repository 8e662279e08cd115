import numpy as np
import pytest

from spdelab import SpaceGrid, TimeGrid, heat_semigroup_apply, heat_tail_mass


class TestSpaceGrid:
    def test_basic_geometry(self):
        g = SpaceGrid((0.0,), (1.0,), (5,))
        assert g.dim == 1
        assert g.spacing == (0.25,)
        assert g.cell_volume == 0.25
        assert np.allclose(g.nodes()[:, 0], [0, 0.25, 0.5, 0.75, 1.0])

    def test_2d_nodes(self):
        g = SpaceGrid((0.0, 0.0), (1.0, 2.0), (2, 3))
        assert g.n_points == 6
        assert g.nodes().shape == (6, 2)

    def test_contains(self):
        g = SpaceGrid((0.0,), (1.0,), (3,))
        assert g.contains(np.array([[0.5], [1.5]])).tolist() == [True, False]

    def test_validation(self):
        with pytest.raises(ValueError):
            SpaceGrid((0.0,), (1.0,), (1,))
        with pytest.raises(ValueError):
            SpaceGrid((1.0,), (0.0,), (4,))
        with pytest.raises(ValueError):
            SpaceGrid((0.0, 0.0, 0.0), (1.0, 1.0, 1.0), (2, 2, 2))


class TestTimeGrid:
    def test_dt_and_index(self):
        tg = TimeGrid(t_end=1.0, steps=4)
        assert tg.dt == 0.25
        assert tg.index_of(0.5) == 2
        assert len(tg.times()) == 5

    def test_index_off_grid(self):
        tg = TimeGrid(t_end=1.0, steps=4)
        with pytest.raises(ValueError):
            tg.index_of(0.3)


class TestHeat:
    def test_identity_at_zero(self):
        g = SpaceGrid((-1.0,), (1.0,), (21,))
        f = np.sin(g.nodes()[:, 0])
        assert np.array_equal(heat_semigroup_apply(f, 0.0, g), f)

    def test_preserves_constants(self):
        g = SpaceGrid((-1.0,), (1.0,), (33,))
        f = np.full(33, 3.7)
        out = heat_semigroup_apply(f, 0.5, g)
        assert np.allclose(out, 3.7, atol=1e-12)

    def test_quadratic_moment_oracle(self):
        # E[(x + B_t)^2] = x^2 + t at interior points of a wide grid
        g = SpaceGrid((-8.0,), (8.0,), (321,))
        x = g.nodes()[:, 0]
        t = 0.3
        out = heat_semigroup_apply(x**2, t, g)
        interior = np.abs(x) < 2.0
        want = x[interior] ** 2 + t
        assert np.allclose(out[interior], want, rtol=1e-3, atol=1e-3)

    def test_semigroup_property(self):
        g = SpaceGrid((-6.0,), (6.0,), (241,))
        x = g.nodes()[:, 0]
        for f in (np.sin(x), np.exp(-(x**2)), 1.0 / (1.0 + x**2)):
            a = heat_semigroup_apply(heat_semigroup_apply(f, 0.1, g), 0.2, g)
            b = heat_semigroup_apply(f, 0.3, g)
            interior = np.abs(x) < 3.0
            assert np.abs(a[interior] - b[interior]).max() < 1e-6

    def test_2d_separability(self):
        g = SpaceGrid((-3.0, -3.0), (3.0, 3.0), (31, 31))
        nodes = g.nodes()
        f = np.sin(nodes[:, 0]) * np.cos(nodes[:, 1])
        out = heat_semigroup_apply(f, 0.2, g)
        assert out.shape == (g.n_points,)
        assert np.all(np.isfinite(out))

    def test_negative_time_rejected(self):
        g = SpaceGrid((0.0,), (1.0,), (5,))
        with pytest.raises(ValueError):
            heat_semigroup_apply(np.zeros(5), -0.1, g)


def test_tail_mass_small_for_wide_box():
    g = SpaceGrid((-6.0,), (6.0,), (9,))
    assert heat_tail_mass(g, 1.0, np.array([0.0])) < 1e-6
    assert heat_tail_mass(g, 1.0, np.array([5.9])) > 1e-3
