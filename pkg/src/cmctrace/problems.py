"""Benchmark problem setups: spherical caps, rivulet strip, liquid bridge.

Each problem bundles a grid, per-edge boundary conditions, a converged
initial surface with its (lambda, V), the volume functional appropriate to
its boundary geometry, closed-form oracles where they exist, and a symmetry
defect functional used to verify branch switching.

Sign conventions (the normal is fixed by x_u cross x_v and never flipped):

* disk: flat conformal image with upward normal; caps of positive volume
  bulge upward and carry lambda < 0.
* rivulet: flat strip with upward normal; drops of positive volume carry
  lambda = -1/r < 0.  The enclosed volume adds the wall patches at v = +-1.
* bridge: cylinder (cos v, sin v, u) whose assembled normal points inward,
  so the initial lambda is +1; enclosed volume is minus the cone-form
  integral plus the constant pi/3 contributed by the cones over the rings.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.optimize import brentq
from scipy.special import ellipj, ellipk

from .geometry import Surface, fundamental_forms
from .spectral import (CHEBYSHEV, FOURIER, Grid, Operators, assemble,
                       make_grid)
from .system import (DIRICHLET, NEUMANN, PERIODIC, BoundaryConditionSet,
                     VolumeModel)

RIVULET_MAX_HALF_LENGTH = 0.3647    # strip half-widths below this lose stability


@dataclass(frozen=True)
class ProblemSpec:
    """A benchmark problem: grid, conditions, initial state and oracles."""

    name: str
    grid: Grid
    ops: Operators = field(repr=False)
    bc: BoundaryConditionSet
    vol: VolumeModel
    initial_surface: Surface = field(repr=False)
    lambda0: float
    volume0: float
    oracles: dict = field(default_factory=dict, repr=False)
    symmetry_defect: Optional[Callable[[Surface], float]] = field(default=None, repr=False)
    normal_note: str = ""
    params: dict = field(default_factory=dict)


# --------------------------------------------------------------------------
# conformal square -> disk map (lemniscatic elliptic function)
# --------------------------------------------------------------------------

_ELLIPTIC_M = 0.5                                   # modulus 1/sqrt(2), self-complementary
_LEM_HALF = float(ellipk(_ELLIPTIC_M)) / np.sqrt(2.0)   # quarter period of the lemniscate sine


def _jacobi_sn_dn_complex(z: np.ndarray):
    """sn and dn with m = 1/2 for complex argument via the real/imag split."""
    x, y = np.real(z), np.imag(z)
    s, c, d, _ = ellipj(x, _ELLIPTIC_M)
    s1, c1, d1, _ = ellipj(y, 1.0 - _ELLIPTIC_M)
    den = c1**2 + _ELLIPTIC_M * (s * s1) ** 2
    sn = (s * d1 + 1j * c * d * s1 * c1) / den
    dn = (d * c1 * d1 - 1j * _ELLIPTIC_M * s * c * s1) / den
    return sn, dn


def _square_to_disk_arrays(u: np.ndarray, v: np.ndarray):
    # lemniscate sine sl(z) = sd(sqrt(2) z, 1/sqrt(2)) / sqrt(2) maps the
    # diagonal square of semidiagonal _LEM_HALF onto the unit disk; rotate the
    # axis-aligned square onto it and rotate back so that the square's axes
    # land on the disk's axes.
    zeta = (_LEM_HALF / np.sqrt(2.0)) * np.exp(-1j * np.pi / 4.0) * (u + 1j * v)
    sn, dn = _jacobi_sn_dn_complex(np.sqrt(2.0) * zeta)
    w = np.exp(1j * np.pi / 4.0) * sn / dn / np.sqrt(2.0)
    return np.real(w), np.imag(w)


def conformal_square_to_disk(points) -> list[tuple[float, float]]:
    """Map points of the closed square [-1, 1]^2 into the closed unit disk.

    Conformal in the interior, boundary onto the unit circle, center to the
    origin, commuting with the square's 8-fold dihedral symmetry (corners map
    to the diagonal directions).
    """
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected a list of (u, v) pairs")
    if np.any(np.abs(pts) > 1.0 + 1e-12):
        raise ValueError("points must lie in the closed square [-1, 1]^2")
    xi, eta = _square_to_disk_arrays(pts[:, 0], pts[:, 1])
    return [(float(a), float(b)) for a, b in zip(xi, eta)]


# --------------------------------------------------------------------------
# spherical caps over the unit disk
# --------------------------------------------------------------------------

def cap_lambda_of_volume(V: float) -> float:
    """Pressure lambda = 2H of the spherical cap enclosing signed volume V."""
    V = float(V)
    S = np.sqrt(np.pi**2 + 9.0 * V**2)
    return (-2.0 * np.pi ** (1.0 / 3.0)
            * (3.0 * V + S - np.pi ** (2.0 / 3.0) * (S - 3.0 * V) ** (1.0 / 3.0))
            / (S * (3.0 * V + S) ** (1.0 / 3.0)))


def cap_height_of_volume(V: float) -> float:
    """Maximum vertical height z_M of the cap enclosing signed volume V."""
    V = float(V)
    a = (3.0 * V + np.sqrt(9.0 * V**2 + np.pi**2)) ** (1.0 / 3.0)
    return (a**2 - np.pi ** (2.0 / 3.0)) / (np.pi ** (1.0 / 3.0) * a)


def cap_volume_of_height(t: float) -> float:
    """Signed volume of the spherical cap of apex height t over the unit circle."""
    return np.pi * t * (3.0 + t * t) / 6.0


def spherical_cap_surface(grid: Grid, t: float) -> Surface:
    """Smoothly parameterized spherical cap of apex height t over the disk grid.

    Composes the conformal square-to-disk map with a polar-angle sweep of the
    sphere through the unit circle, which keeps every coordinate field
    analytic on the closed square (unlike the vertical graph, whose slope
    blows up at the equator).  t = 0 returns the flat disk image.
    """
    u, v = grid.meshgrid()
    xi, eta = _square_to_disk_arrays(u / grid.l_u, v / grid.l_v)
    if t == 0.0:
        return Surface(grid=grid, x=xi, y=eta, z=np.zeros(grid.k))
    R = (1.0 + t * t) / (2.0 * abs(t))
    psi_max = np.arcsin(min(1.0, 1.0 / R))
    if abs(t) > 1.0:
        psi_max = np.pi - psi_max          # large caps pass the hemisphere
    rho = np.hypot(xi, eta)
    psi = rho * psi_max
    # sin(psi)/rho and the vertical part are even functions of rho: smooth at 0
    with np.errstate(invalid="ignore", divide="ignore"):
        radial = np.where(rho > 1e-12, np.sin(psi) / np.maximum(rho, 1e-300),
                          psi_max)
    sign = 1.0 if t > 0 else -1.0
    center_z = sign * (abs(t) - R)
    z = center_z + sign * R * np.cos(psi)
    return Surface(grid=grid, x=R * radial * xi, y=R * radial * eta, z=z)


def disk_problem(n: int, m: int) -> ProblemSpec:
    """Spherical caps over the unit circle: flat conformal disk start.

    Parameter square (-1, 1)^2, Dirichlet on all edges, initial surface the
    conformal image of the square with (lambda0, V0) = (0, 0).
    """
    if n < 8 or m < 8:
        raise ValueError("disk problem needs n, m >= 8")
    grid = make_grid(n, m, 1.0, 1.0, CHEBYSHEV, CHEBYSHEV)
    ops = assemble(grid)
    bc = BoundaryConditionSet(DIRICHLET, DIRICHLET, DIRICHLET, DIRICHLET)
    initial = spherical_cap_surface(grid, 0.0)
    oracles = {
        "lambda": cap_lambda_of_volume,
        "z_max": cap_height_of_volume,
    }
    return ProblemSpec(name="disk", grid=grid, ops=ops, bc=bc,
                       vol=VolumeModel(), initial_surface=initial,
                       lambda0=0.0, volume0=0.0, oracles=oracles,
                       symmetry_defect=None,
                       normal_note="upward normal; caps with V > 0 have lambda < 0",
                       params={"n": n, "m": m})


# --------------------------------------------------------------------------
# Plateau-Rayleigh rivulet on a strip
# --------------------------------------------------------------------------

def rivulet_family(t: float, l: float):
    """Closed-form cylindrical drop of apex height t on the strip of half-width l.

    Returns (r, zeta, z0, lam, V): circle radius, half-opening angle, center
    depth, pressure and enclosed volume.
    """
    r = (l * l + t * t) / (2.0 * t)
    zeta = np.arccos((l * l - t * t) / (l * l + t * t))
    z0 = (l * l - t * t) / (2.0 * t)
    lam = -1.0 / r
    V = 2.0 * (r * r * zeta - l * z0)
    return r, zeta, z0, lam, V


def rivulet_mu0(t: float, l: float) -> float:
    """Smallest twisted eigenvalue of the cylindrical drop of apex height t."""
    _, zeta, _, lam, _ = rivulet_family(t, l)
    return lam * lam * (np.pi**2 / (4.0 * zeta**2) - 1.0) + np.pi**2 / 4.0


def rivulet_height_of_volume(V: float, l: float) -> float:
    """Invert the strictly increasing V(t) of the cylindrical drop family."""
    if V <= 0:
        raise ValueError("family volume must be positive")
    hi = max(3.0 * l, 1.0)
    while rivulet_family(hi, l)[4] < V:
        hi *= 2.0
    return brentq(lambda t: rivulet_family(t, l)[4] - V, 1e-12, hi, xtol=1e-15)


def rivulet_lambda_of_volume(V: float, l: float) -> float:
    if V == 0.0:
        return 0.0
    return rivulet_family(rivulet_height_of_volume(V, l), l)[3]


def rivulet_mu0_of_volume(V: float, l: float) -> float:
    if V == 0.0:
        return np.pi**2 / (4.0 * l * l) + np.pi**2 / 4.0
    return rivulet_mu0(rivulet_height_of_volume(V, l), l)


def rivulet_critical_volume(l: float) -> float:
    """Volume of the first stability loss (mu0 = 0) of the cylindrical branch.

    mu0 dips negative on an interior window of drop heights, so the bracket
    for the first root is found by scanning upward from t = 0.
    """
    ts = np.linspace(1e-4, 10.0 * l, 400)
    mus = np.array([rivulet_mu0(t, l) for t in ts])
    sign_change = np.flatnonzero((mus[:-1] > 0) & (mus[1:] <= 0))
    if not len(sign_change):
        raise ValueError(f"no stability loss for l = {l}")
    i = sign_change[0]
    t_star = brentq(lambda t: rivulet_mu0(t, l), ts[i], ts[i + 1], xtol=1e-14)
    return rivulet_family(t_star, l)[4]


def rivulet_surface(grid: Grid, t: float) -> Surface:
    """Cylindrical drop surface of apex height t on the rivulet grid."""
    u, v = grid.meshgrid()
    l = grid.l_u
    if t == 0.0:
        return Surface(grid=grid, x=u.copy(), y=v.copy(), z=np.zeros(grid.k))
    r, zeta, z0, _, _ = rivulet_family(t, l)
    theta = zeta * u / l
    return Surface(grid=grid, x=r * np.sin(theta), y=v.copy(),
                   z=r * np.cos(theta) - z0)


def _rivulet_wall_closure(surface: Surface, ops: Operators) -> float:
    """Divergence-theorem contribution of the wall patches at v = +-1.

    Each patch lies in a plane where x . n_out = 1, so it contributes one
    third of its area; the (signed) area is the integral of z x_u du along
    the surface's trace on the wall.
    """
    grid = surface.grid
    xu = ops.L_u @ surface.x
    z_xu = grid.reshape(surface.z * xu)
    w_u = ops.w_u
    return (float(w_u @ z_xu[:, 0]) + float(w_u @ z_xu[:, -1])) / 3.0


def _rivulet_axial_defect(surface: Surface) -> float:
    """Asymmetry of the drop under the axial reflection v -> -v."""
    z = surface.grid.reshape(surface.z)
    return float(np.max(np.abs(z - z[:, ::-1])))


def rivulet_problem(l: float, n: int, m: int) -> ProblemSpec:
    """Sessile drop on the strip (-l, l) x (-1, 1) between parallel plates.

    Dirichlet (pinned contact line) at u = +-l, homogeneous Neumann at the
    plates v = +-1; corner nodes are pinned.  Initial surface is the flat
    strip with (lambda0, V0) = (0, 0).
    """
    if not 0.0 < l < RIVULET_MAX_HALF_LENGTH:
        raise ValueError(
            f"need 0 < l < {RIVULET_MAX_HALF_LENGTH} for the instability to exist, got {l}")
    grid = make_grid(n, m, l, 1.0, CHEBYSHEV, CHEBYSHEV)
    ops = assemble(grid)
    bc = BoundaryConditionSet(u_lo=DIRICHLET, u_hi=DIRICHLET,
                              v_lo=NEUMANN, v_hi=NEUMANN)
    initial = rivulet_surface(grid, 0.0)
    oracles = {
        "lambda": lambda V: rivulet_lambda_of_volume(V, l),
        "mu_min": lambda V: rivulet_mu0_of_volume(V, l),
        "v_star": lambda: rivulet_critical_volume(l),
    }
    return ProblemSpec(name="rivulet", grid=grid, ops=ops, bc=bc,
                       vol=VolumeModel(closure=_rivulet_wall_closure),
                       initial_surface=initial, lambda0=0.0, volume0=0.0,
                       oracles=oracles, symmetry_defect=_rivulet_axial_defect,
                       normal_note="upward normal; drops with V > 0 have lambda = -1/r",
                       params={"n": n, "m": m, "l": l})


# --------------------------------------------------------------------------
# liquid bridge between coaxial unit rings
# --------------------------------------------------------------------------

def bridge_cylinder_surface(grid: Grid) -> Surface:
    """Unit cylinder (cos v, sin v, u) spanning the rings at u = +-1/2."""
    u, v = grid.meshgrid()
    return Surface(grid=grid, x=np.cos(v), y=np.sin(v), z=u.copy())


def angular_mode_energies(surface: Surface, max_mode: Optional[int] = None) -> np.ndarray:
    """Energy in each angular Fourier mode of the radial coordinate field.

    Mode q energy is the squared amplitude of e^{i q v} in rho(u, v) summed
    over the axial grid lines; mode 0 carries the rotationally invariant part.
    """
    grid = surface.grid
    if grid.kind_v != FOURIER:
        raise ValueError("angular modes need a Fourier v direction")
    rho = grid.reshape(np.hypot(surface.x, surface.y))
    coeff = np.fft.rfft(rho, axis=1) / grid.points_v
    energies = np.sum(np.abs(coeff) ** 2, axis=0)
    if max_mode is not None:
        energies = energies[:max_mode + 1]
    return energies


def dominant_angular_mode(surface: Surface) -> int:
    """Index q >= 1 of the strongest non-axisymmetric angular mode."""
    energies = angular_mode_energies(surface)
    return int(np.argmax(energies[1:]) + 1)


def _bridge_rotational_defect(surface: Surface) -> float:
    """Deviation of the radial and height fields from rotational invariance."""
    grid = surface.grid
    rho = grid.reshape(np.hypot(surface.x, surface.y))
    z = grid.reshape(surface.z)
    d_rho = np.max(np.abs(rho - rho.mean(axis=1, keepdims=True)))
    d_z = np.max(np.abs(z - z.mean(axis=1, keepdims=True)))
    return float(max(d_rho, d_z))


def bridge_problem(n: int, m: int) -> ProblemSpec:
    """Liquid bridge spanning coaxial unit rings one unit apart.

    Axial direction Chebyshev on (-1/2, 1/2) with pinned rings; angular
    direction Fourier with period 2 pi.  The initial unit cylinder has
    inward assembled normal, so lambda0 = +1 (computed from the discrete
    geometry) and the enclosed volume pi comes from negating the cone-form
    integral and adding the two ring cones' pi/3.
    """
    if m % 2 != 0:
        raise ValueError("bridge problem needs an even angular node count m")
    grid = make_grid(n, m, 0.5, np.pi, CHEBYSHEV, FOURIER)
    ops = assemble(grid)
    bc = BoundaryConditionSet(u_lo=DIRICHLET, u_hi=DIRICHLET,
                              v_lo=PERIODIC, v_hi=PERIODIC)
    initial = bridge_cylinder_surface(grid)
    vol = VolumeModel(sign=-1.0, offset=np.pi / 3.0)
    geom = fundamental_forms(initial, ops)
    lambda0 = float(2.0 * np.mean(geom.H))

    return ProblemSpec(name="bridge", grid=grid, ops=ops, bc=bc, vol=vol,
                       initial_surface=initial, lambda0=lambda0,
                       volume0=np.pi, oracles={},
                       symmetry_defect=_bridge_rotational_defect,
                       normal_note="inward normal; unit cylinder has lambda0 = +1",
                       params={"n": n, "m": m})


# --------------------------------------------------------------------------
# registry
# --------------------------------------------------------------------------

def build_problem(name: str, n: int, m: int, l: Optional[float] = None) -> ProblemSpec:
    """Build a ProblemSpec by registry key ('disk', 'rivulet', 'bridge')."""
    if name == "disk":
        return disk_problem(n, m)
    if name == "rivulet":
        if l is None:
            raise ValueError("rivulet problem needs the strip half-width l")
        return rivulet_problem(l, n, m)
    if name == "bridge":
        return bridge_problem(n, m)
    raise ValueError(f"unknown problem {name!r}; expected disk, rivulet or bridge")


PROBLEM_NAMES = ("disk", "rivulet", "bridge")
