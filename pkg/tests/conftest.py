import numpy as np
import pytest

from cmctrace.geometry import Surface
from cmctrace.problems import (bridge_problem, disk_problem, rivulet_family,
                               rivulet_problem, rivulet_surface,
                               spherical_cap_surface)
from cmctrace.spectral import CHEBYSHEV, assemble, make_grid
from cmctrace.system import BoundaryConditionSet, make_base_state


@pytest.fixture(scope="session")
def disk12():
    return disk_problem(12, 12)


@pytest.fixture(scope="session")
def disk16():
    return disk_problem(16, 16)


@pytest.fixture(scope="session")
def disk24():
    return disk_problem(24, 24)


@pytest.fixture(scope="session")
def rivulet16():
    return rivulet_problem(0.2, 16, 16)


@pytest.fixture(scope="session")
def bridge12():
    return bridge_problem(12, 12)


@pytest.fixture(scope="session")
def sphere_patch():
    """Spherical patch away from the poles on a plain Chebyshev rectangle."""
    grid = make_grid(12, 12, 0.35, 0.5, CHEBYSHEV, CHEBYSHEV)
    ops = assemble(grid)
    u, v = grid.meshgrid()
    uu = u + 0.9
    surface = Surface(grid=grid, x=np.sin(uu) * np.cos(v),
                      y=np.sin(uu) * np.sin(v), z=np.cos(uu))
    return grid, ops, surface


@pytest.fixture(scope="session")
def cap_base(disk16):
    """Converged spherical-cap base state of apex height 0.6."""
    t = 0.6
    lam = -4.0 * t / (1.0 + t * t)
    surface = spherical_cap_surface(disk16.grid, t)
    return make_base_state(surface, lam, disk16.ops, disk16.vol)


@pytest.fixture(scope="session")
def rivulet_drop_base(rivulet16):
    """Converged cylindrical-drop base state of apex height 0.15."""
    t = 0.15
    lam = rivulet_family(t, 0.2)[3]
    surface = rivulet_surface(rivulet16.grid, t)
    return make_base_state(surface, lam, rivulet16.ops, rivulet16.vol)


@pytest.fixture(scope="session")
def bridge_base(bridge12):
    return make_base_state(bridge12.initial_surface, bridge12.lambda0,
                           bridge12.ops, bridge12.vol)
