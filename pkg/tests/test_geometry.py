import numpy as np
import pytest

from cmctrace.errors import DegenerateSurfaceError
from cmctrace.geometry import (Surface, fundamental_forms,
                               laplace_beltrami_coeffs,
                               laplace_beltrami_matrix, signed_volume,
                               surface_integral)
from cmctrace.problems import spherical_cap_surface
from cmctrace.spectral import assemble, make_grid


def flat_sheet(n=10, m=10, l_u=1.0, l_v=1.0):
    grid = make_grid(n, m, l_u, l_v)
    u, v = grid.meshgrid()
    return grid, assemble(grid), Surface(grid=grid, x=u.copy(), y=v.copy(),
                                         z=np.zeros(grid.k))


class TestFundamentalForms:
    def test_flat_sheet(self):
        _, ops, surf = flat_sheet()
        g = fundamental_forms(surf, ops)
        np.testing.assert_allclose(g.E, 1.0, atol=1e-12)
        np.testing.assert_allclose(g.G, 1.0, atol=1e-12)
        np.testing.assert_allclose(g.F, 0.0, atol=1e-12)
        np.testing.assert_allclose(g.H, 0.0, atol=1e-11)
        np.testing.assert_allclose(g.K, 0.0, atol=1e-11)
        np.testing.assert_allclose(g.normal[2], 1.0, atol=1e-12)

    def test_unit_sphere_patch(self, sphere_patch):
        _, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        np.testing.assert_allclose(np.abs(g.H), 1.0, atol=1e-10)
        np.testing.assert_allclose(g.K, 1.0, atol=1e-10)

    def test_cylinder(self):
        grid = make_grid(12, 12, 1.0, 1.0)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        r = 0.7
        surf = Surface(grid=grid, x=r * np.cos(u), y=r * np.sin(u), z=v.copy())
        g = fundamental_forms(surf, ops)
        np.testing.assert_allclose(np.abs(g.H), 1.0 / (2 * r), atol=1e-10)
        np.testing.assert_allclose(g.K, 0.0, atol=1e-10)

    def test_unit_normals(self, sphere_patch):
        _, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        norms = np.sqrt((g.normal**2).sum(axis=0))
        np.testing.assert_allclose(norms, 1.0, atol=1e-12)

    def test_mean_dominates_gauss(self, sphere_patch, cap_base):
        _, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        assert np.all(g.H**2 >= g.K - 1e-10)
        g2 = cap_base.geom0
        ok = ~g2.degenerate
        assert np.all(g2.H[ok]**2 >= g2.K[ok] - 1e-8)

    def test_interior_degeneracy_raises(self):
        grid = make_grid(8, 8, 1.0, 1.0)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        # pinch the sheet: x depends only on u^2, degenerate along u = 0
        surf = Surface(grid=grid, x=u**2, y=v.copy(), z=np.zeros(grid.k))
        with pytest.raises(DegenerateSurfaceError) as err:
            fundamental_forms(surf, ops)
        assert 0 <= err.value.node < grid.k

    def test_conformal_disk_corner_repair(self, disk12):
        g = fundamental_forms(disk12.initial_surface, disk12.ops)
        assert g.degenerate.sum() == 4
        assert np.all(disk12.ops.boundary_mask[g.degenerate])
        # repaired normal is the smooth limit (0, 0, 1)
        np.testing.assert_allclose(g.normal[2][g.degenerate], 1.0, atol=1e-6)
        np.testing.assert_allclose(g.H, 0.0, atol=1e-9)


class TestSignedVolume:
    def test_flat_disk_is_zero(self, disk12):
        assert abs(signed_volume(disk12.initial_surface, disk12.ops)) < 1e-14

    def test_hemisphere(self, disk24):
        surf = spherical_cap_surface(disk24.grid, 1.0)
        assert abs(signed_volume(surf, disk24.ops) - 2 * np.pi / 3) < 1e-8

    def test_orientation_antisymmetry(self, disk12):
        surf = spherical_cap_surface(disk12.grid, 0.5)
        flipped = Surface(grid=surf.grid, x=surf.x, y=surf.y, z=-surf.z)
        v1 = signed_volume(surf, disk12.ops)
        v2 = signed_volume(flipped, disk12.ops)
        assert abs(v1 + v2) < 1e-12 and abs(v1) > 1e-3


class TestSurfaceIntegral:
    def test_flat_patch_area(self):
        _, ops, surf = flat_sheet(10, 10, 0.5, 1.0)
        g = fundamental_forms(surf, ops)
        assert abs(surface_integral(np.ones(surf.grid.k), g, ops) - 2.0) < 1e-12

    def test_sphere_patch_area(self, sphere_patch):
        grid, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        # area element sin(u + 0.9) du dv on the parameter rectangle
        u0, du, dv = 0.9, grid.l_u, grid.l_v
        exact = 2 * dv * (np.cos(u0 - du) - np.cos(u0 + du))
        assert abs(surface_integral(np.ones(grid.k), g, ops) - exact) < 1e-10

    def test_linearity(self, sphere_patch):
        grid, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        rng = np.random.default_rng(0)
        f1, f2 = rng.standard_normal((2, grid.k))
        lhs = surface_integral(2.5 * f1 - 1.25 * f2, g, ops)
        rhs = 2.5 * surface_integral(f1, g, ops) - 1.25 * surface_integral(f2, g, ops)
        assert abs(lhs - rhs) < 1e-12


class TestLaplaceBeltrami:
    def test_flat_sheet_coefficients(self):
        _, ops, surf = flat_sheet()
        g = fundamental_forms(surf, ops)
        A0, A1, A2, A3, A4 = laplace_beltrami_coeffs(g, ops)
        np.testing.assert_allclose(A0, 1.0, atol=1e-11)
        np.testing.assert_allclose(A2, 1.0, atol=1e-11)
        np.testing.assert_allclose(A1, 0.0, atol=1e-11)
        np.testing.assert_allclose(A3, 0.0, atol=1e-9)
        np.testing.assert_allclose(A4, 0.0, atol=1e-9)

    def test_spherical_harmonic_eigenfunction(self, sphere_patch):
        grid, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        L = laplace_beltrami_matrix(g, ops)
        interior = ~ops.boundary_mask
        # z restricted to the unit sphere is a degree-1 harmonic: Lap z = -2 z
        err = (L @ surf.z + 2.0 * surf.z)[interior]
        assert np.max(np.abs(err)) < 1e-8
        # and a degree-2 harmonic
        y2 = surf.x * surf.y
        err2 = (L @ y2 + 6.0 * y2)[interior]
        assert np.max(np.abs(err2)) < 1e-7

    def test_constants_in_kernel(self, sphere_patch):
        grid, ops, surf = sphere_patch
        g = fundamental_forms(surf, ops)
        L = laplace_beltrami_matrix(g, ops)
        interior = ~ops.boundary_mask
        assert np.max(np.abs((L @ np.ones(grid.k))[interior])) < 1e-10

    def test_constants_in_kernel_conformal_cap(self, cap_base, disk16):
        # the conformal corners amplify rounding by 1/|g|; the kernel property
        # holds there to the corresponding floating-point floor
        L = laplace_beltrami_matrix(cap_base.geom0, disk16.ops)
        interior = ~disk16.ops.boundary_mask
        assert np.max(np.abs((L @ np.ones(disk16.grid.k))[interior])) < 1e-8


class TestInvariances:
    @staticmethod
    def _rotate(surf, axis_angle):
        from scipy.spatial.transform import Rotation
        R = Rotation.from_rotvec(axis_angle).as_matrix()
        xyz = R @ surf.coords()
        return Surface(grid=surf.grid, x=xyz[0], y=xyz[1], z=xyz[2])

    def test_isometry_invariance(self, disk12):
        # rotations about the origin leave H, K and the signed volume alone
        surf = spherical_cap_surface(disk12.grid, 0.4)
        g1 = fundamental_forms(surf, disk12.ops)
        rot = self._rotate(surf, np.array([0.3, -0.2, 0.9]))
        g2 = fundamental_forms(rot, disk12.ops)
        ok = ~g1.degenerate
        assert np.max(np.abs(g1.H[ok] - g2.H[ok])) < 1e-10
        assert np.max(np.abs(g1.K[ok] - g2.K[ok])) < 1e-10
        assert abs(signed_volume(surf, disk12.ops)
                   - signed_volume(rot, disk12.ops)) < 1e-10

    def test_orientation_covariance(self, disk12):
        surf = spherical_cap_surface(disk12.grid, 0.4)
        g1 = fundamental_forms(surf, disk12.ops)
        # reverse the u parameter: relabel nodes i -> n - i
        pu, pv = disk12.grid.points_u, disk12.grid.points_v
        def rev(f):
            return f.reshape(pu, pv)[::-1, :].ravel()
        surf_r = Surface(grid=surf.grid, x=rev(surf.x), y=rev(surf.y), z=rev(surf.z))
        g2 = fundamental_forms(surf_r, disk12.ops)
        ok = ~(g1.degenerate | rev(g2.degenerate).astype(bool))
        np.testing.assert_allclose(rev(g2.H)[ok], -g1.H[ok], atol=1e-9)
        np.testing.assert_allclose(rev(g2.K)[ok], g1.K[ok], atol=1e-9)
        np.testing.assert_allclose(rev(g2.normal[2]), -g1.normal[2], atol=1e-9)
        assert abs(signed_volume(surf_r, disk12.ops)
                   + signed_volume(surf, disk12.ops)) < 1e-12

    def test_graph_mean_curvature(self):
        grid = make_grid(16, 16, 1.0, 1.0)
        ops = assemble(grid)
        u, v = grid.meshgrid()
        f = (u**2 + v**2) / 4.0
        surf = Surface(grid=grid, x=u.copy(), y=v.copy(), z=f)
        g = fundamental_forms(surf, ops)
        fu, fv = u / 2.0, v / 2.0
        fuu = fvv = 0.5
        w2 = 1.0 + fu**2 + fv**2
        H_exact = ((1 + fv**2) * fuu + (1 + fu**2) * fvv) / (2 * w2**1.5)
        interior = ~ops.boundary_mask
        assert np.max(np.abs(g.H[interior] - H_exact[interior])) < 1e-8
