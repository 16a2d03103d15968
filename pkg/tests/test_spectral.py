import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cmctrace.spectral import (CHEBYSHEV, FOURIER, assemble, cheb_diff,
                               cheb_nodes, clenshaw_curtis, fourier_diff,
                               fourier_diff2, fourier_nodes, fourier_weights,
                               make_grid)


class TestChebNodes:
    def test_three_nodes(self):
        np.testing.assert_allclose(cheb_nodes(2, 1.0), [1.0, 0.0, -1.0], atol=1e-15)

    def test_endpoints_only(self):
        np.testing.assert_allclose(cheb_nodes(1, 2.0), [2.0, -2.0], atol=1e-15)

    def test_five_nodes_analytic(self):
        s = np.sqrt(2.0) / 2.0
        np.testing.assert_allclose(cheb_nodes(4, 1.0), [1.0, s, 0.0, -s, -1.0],
                                   atol=1e-15)

    def test_strictly_decreasing(self):
        x = cheb_nodes(17, 0.3)
        assert np.all(np.diff(x) < 0)
        assert x[0] == 0.3 and x[-1] == -0.3

    @pytest.mark.parametrize("n,l", [(0, 1.0), (3, 0.0), (3, -1.0)])
    def test_invalid_arguments(self, n, l):
        with pytest.raises(ValueError):
            cheb_nodes(n, l)


class TestChebDiff:
    def test_identity_function(self):
        D = cheb_diff(1, 1.0)
        x = cheb_nodes(1, 1.0)
        np.testing.assert_allclose(D @ x, np.ones(2), atol=1e-14)

    def test_cubic(self):
        D = cheb_diff(4, 1.0)
        x = cheb_nodes(4, 1.0)
        np.testing.assert_allclose(D @ x**3, 3 * x**2, atol=1e-13)

    def test_row_sums_vanish(self):
        D = cheb_diff(16, 2.5)
        np.testing.assert_allclose(D.sum(axis=1), 0.0, atol=1e-12)

    @pytest.mark.parametrize("n", [4, 8, 16, 24])
    def test_polynomial_exactness(self, n):
        D = cheb_diff(n, 1.0)
        x = cheb_nodes(n, 1.0)
        for d in range(n + 1):
            err = np.max(np.abs(D @ x**d - d * x ** max(d - 1, 0) * (d > 0)))
            assert err < 1e-11 * n**2

    def test_scale_factor(self):
        l = 0.2
        D = cheb_diff(8, l)
        x = cheb_nodes(8, l)
        np.testing.assert_allclose(D @ x**2, 2 * x, atol=1e-12)


class TestFourierDiff:
    def test_trig_exactness(self):
        m, period = 16, 4.0
        D = fourier_diff(m, period)
        x = fourier_nodes(m, period / 2.0)
        f = np.sin(2 * np.pi * x / period)
        df = (2 * np.pi / period) * np.cos(2 * np.pi * x / period)
        np.testing.assert_allclose(D @ f, df, atol=1e-12)

    def test_constant(self):
        D = fourier_diff(10, 2 * np.pi)
        np.testing.assert_allclose(D @ np.ones(10), 0.0, atol=1e-13)

    def test_antisymmetry(self):
        D = fourier_diff(12, 2 * np.pi)
        np.testing.assert_allclose(D + D.T, 0.0, atol=1e-12)

    @pytest.mark.parametrize("m", [1, 3, 7])
    def test_odd_m_rejected(self, m):
        with pytest.raises(ValueError):
            fourier_diff(m, 2 * np.pi)

    def test_second_derivative_matrix(self):
        m = 16
        D2 = fourier_diff2(m, 2 * np.pi)
        x = fourier_nodes(m, np.pi)
        for q in (1, 3):
            np.testing.assert_allclose(D2 @ np.cos(q * x), -q**2 * np.cos(q * x),
                                       atol=1e-10)
        # Nyquist sawtooth: the squared first-derivative matrix annihilates it,
        # the dedicated matrix returns the exact -(m/2)^2 multiple
        saw = (-1.0) ** np.arange(m)
        np.testing.assert_allclose(D2 @ saw, -(m / 2) ** 2 * saw, atol=1e-9)
        D = fourier_diff(m, 2 * np.pi)
        np.testing.assert_allclose((D @ D) @ saw, 0.0, atol=1e-9)


class TestClenshawCurtis:
    def test_three_point_weights(self):
        np.testing.assert_allclose(clenshaw_curtis(2, 1.0),
                                   [1 / 3, 4 / 3, 1 / 3], atol=1e-14)

    def test_measure(self):
        for n, l in [(5, 1.0), (9, 0.4), (16, 3.0)]:
            assert abs(clenshaw_curtis(n, l).sum() - 2 * l) < 1e-13

    def test_sixth_power(self):
        w = clenshaw_curtis(8, 1.0)
        x = cheb_nodes(8, 1.0)
        assert abs(w @ x**6 - 2.0 / 7.0) < 1e-12

    @given(st.integers(min_value=1, max_value=60))
    @settings(max_examples=30, deadline=None)
    def test_positivity(self, n):
        assert np.all(clenshaw_curtis(n, 1.0) > 0)

    def test_degree_n_exactness(self):
        n = 11
        w = clenshaw_curtis(n, 1.0)
        x = cheb_nodes(n, 1.0)
        for d in range(n + 1):
            exact = 2.0 / (d + 1) if d % 2 == 0 else 0.0
            assert abs(w @ x**d - exact) < 1e-13


class TestAssemble:
    def test_mixed_partial_of_uv(self):
        grid = make_grid(9, 7, 1.3, 0.8)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        np.testing.assert_allclose(ops.L_uv @ (u * v), 1.0, atol=1e-11)

    def test_analytic_derivative(self):
        grid = make_grid(24, 24, 1.0, 1.0)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        f = np.exp(u) * np.sin(v)
        assert np.max(np.abs(ops.L_u @ f - f)) < 1e-10
        assert np.max(np.abs(ops.L_v @ f - np.exp(u) * np.cos(v))) < 1e-10

    def test_quadrature_of_one(self):
        grid = make_grid(10, 14, 1.0, 1.0)
        ops = assemble(grid)
        assert abs(ops.w @ np.ones(grid.k) - 4.0) < 1e-12

    def test_quadrature_rectangle_area(self):
        grid = make_grid(8, 8, 0.2, 1.0)
        ops = assemble(grid)
        assert abs(ops.w @ np.ones(grid.k) - 4 * 0.2 * 1.0) < 1e-12

    def test_kronecker_identities_chebyshev(self):
        grid = make_grid(7, 6, 1.0, 0.5)
        ops = assemble(grid)
        assert np.array_equal(ops.L_uu, ops.L_u @ ops.L_u)
        assert np.array_equal(ops.L_uv, ops.L_u @ ops.L_v)
        assert np.array_equal(ops.L_vv, ops.L_v @ ops.L_v)

    def test_vectorization_consistency(self):
        grid = make_grid(9, 6, 1.0, 2.0)
        ops = assemble(grid)
        rng = np.random.default_rng(5)
        f = rng.standard_normal(grid.k)
        F = grid.reshape(f)
        np.testing.assert_allclose(grid.reshape(ops.L_u @ f), ops.D_u @ F,
                                   atol=1e-12)
        np.testing.assert_allclose(grid.reshape(ops.L_v @ f), F @ ops.D_v.T,
                                   atol=1e-12)

    def test_boundary_mask_chebyshev(self):
        grid = make_grid(6, 5, 1.0, 1.0)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        expected = (np.abs(u) >= 1 - 1e-14) | (np.abs(v) >= 1 - 1e-14)
        assert np.array_equal(ops.boundary_mask, expected)

    def test_boundary_mask_fourier(self):
        grid = make_grid(6, 8, 0.5, np.pi, CHEBYSHEV, FOURIER)
        ops = assemble(grid)
        mask = grid.reshape(ops.boundary_mask)
        assert mask[0].all() and mask[-1].all()
        assert not mask[1:-1].any()

    def test_fourier_direction_quadrature(self):
        grid = make_grid(6, 8, 0.5, np.pi, CHEBYSHEV, FOURIER)
        ops = assemble(grid)
        assert abs(ops.w @ np.ones(grid.k) - 4 * 0.5 * np.pi) < 1e-12
        np.testing.assert_allclose(fourier_weights(8, np.pi), np.pi / 4)

    def test_spectral_convergence(self):
        errs = []
        for n in (8, 12, 16, 20, 24):
            grid = make_grid(n, n, 1.0, 1.0)
            ops = assemble(grid)
            u, v = grid.meshgrid()
            f = np.exp(u) * np.sin(v)
            errs.append(np.max(np.abs(ops.L_u @ f - f)))
        errs = np.array(errs)
        # decays until the rounding floor; super-algebraic early on
        above_floor = errs > 1e-12
        assert np.all(np.diff(errs[above_floor]) < 0)
        assert errs[-1] < 1e-11
        assert errs[1] / errs[0] < (8 / 12) ** 4
