"""Discrete differential geometry of parameterized surfaces on a grid.

Fundamental forms, unit normal, mean and Gauss curvature, the divergence-form
signed volume, surface integrals, and the coefficient fields of the
Laplace-Beltrami operator in (u, v) coordinates.

Degenerate boundary nodes
-------------------------
Conformally mapped grids can carry nodes where the parameterization derivative
vanishes exactly (the four corners of a square-to-disk image).  At such nodes
EG - F^2 underflows to roundoff noise and every ratio of metric quantities is
0/0 even though the surface itself is perfectly smooth there.  Those nodes are
always pinned boundary nodes, so we evaluate the smooth limits instead:
ratio fields (the normal, H, K, and the Laplace-Beltrami coefficients) are
extrapolated along the grid lines through the node with the spectral
barycentric interpolant.  Degeneracy at an interior node is a genuine loss of
regularity and raises ``DegenerateSurfaceError``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateSurfaceError
from .spectral import Grid, Operators, barycentric_interpolate

DEGENERACY_RTOL = 1e-12


@dataclass(frozen=True)
class Surface:
    """Vectorized coordinate fields of a parameterized surface."""

    grid: Grid
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    z: np.ndarray = field(repr=False)

    def __post_init__(self):
        k = self.grid.k
        for name in ("x", "y", "z"):
            arr = getattr(self, name)
            if arr.shape != (k,):
                raise ValueError(f"coordinate {name} has shape {arr.shape}, expected ({k},)")

    def coords(self) -> np.ndarray:
        """Stacked (3, k) coordinate array."""
        return np.stack([self.x, self.y, self.z])


@dataclass(frozen=True)
class SurfaceGeometry:
    """First and second fundamental forms, normal and curvatures of a Surface.

    ``sqrt_detg`` carries the true (possibly underflowed-to-zero) area element;
    ``normal``, ``H`` and ``K`` are repaired by smooth-limit extrapolation at
    nodes flagged in ``degenerate`` (always boundary nodes).  Immutable.
    """

    surface: Surface
    E: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    G: np.ndarray = field(repr=False)
    detg: np.ndarray = field(repr=False)
    sqrt_detg: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)          # shape (3, k)
    L2: np.ndarray = field(repr=False)
    M2: np.ndarray = field(repr=False)
    N2: np.ndarray = field(repr=False)
    H: np.ndarray = field(repr=False)
    K: np.ndarray = field(repr=False)
    cross: np.ndarray = field(repr=False)           # x_u x x_v, shape (3, k)
    degenerate: np.ndarray = field(repr=False)      # bool mask, length k

    @property
    def grid(self) -> Grid:
        return self.surface.grid


def fundamental_forms(surface: Surface, ops: Operators) -> SurfaceGeometry:
    """Compute all SurfaceGeometry fields for ``surface``.

    H = (G*L - 2*F*M + E*N) / (2*(EG - F^2)) and K = (L*N - M^2)/(EG - F^2),
    the trace and determinant of g^{-1} h expanded in coefficients.  The
    normal direction is fixed by the parameterization (x_u cross x_v) and is
    never flipped internally.

    Raises
    ------
    DegenerateSurfaceError
        If EG - F^2 falls below ``DEGENERACY_RTOL * max(EG - F^2)`` at any
        non-boundary node.
    """
    x, y, z = surface.x, surface.y, surface.z
    xu, yu, zu = ops.L_u @ x, ops.L_u @ y, ops.L_u @ z
    xv, yv, zv = ops.L_v @ x, ops.L_v @ y, ops.L_v @ z

    E = xu * xu + yu * yu + zu * zu
    F = xu * xv + yu * yv + zu * zv
    G = xv * xv + yv * yv + zv * zv
    detg = E * G - F * F

    deg = detg < DEGENERACY_RTOL * detg.max()
    bad = deg & ~ops.boundary_mask
    if bad.any():
        node = int(np.flatnonzero(bad)[0])
        raise DegenerateSurfaceError(node, float(detg[node]))

    safe = np.where(deg, 1.0, detg)
    sg = np.sqrt(safe)

    cx = yu * zv - zu * yv
    cy = zu * xv - xu * zv
    cz = xu * yv - yu * xv
    nx = np.where(deg, 0.0, cx / sg)
    ny = np.where(deg, 0.0, cy / sg)
    nz = np.where(deg, 0.0, cz / sg)
    if deg.any():
        nx, ny, nz = (_repair(f, deg, surface.grid) for f in (nx, ny, nz))
        norm = np.sqrt(nx * nx + ny * ny + nz * nz)
        scale = np.where(deg, 1.0 / np.maximum(norm, 1e-300), 1.0)
        nx, ny, nz = nx * scale, ny * scale, nz * scale

    xuu, yuu, zuu = ops.L_uu @ x, ops.L_uu @ y, ops.L_uu @ z
    xuv, yuv, zuv = ops.L_uv @ x, ops.L_uv @ y, ops.L_uv @ z
    xvv, yvv, zvv = ops.L_vv @ x, ops.L_vv @ y, ops.L_vv @ z
    L2 = xuu * nx + yuu * ny + zuu * nz
    M2 = xuv * nx + yuv * ny + zuv * nz
    N2 = xvv * nx + yvv * ny + zvv * nz

    H = (G * L2 - 2.0 * F * M2 + E * N2) / (2.0 * safe)
    K = (L2 * N2 - M2 * M2) / safe
    if deg.any():
        H = _repair(H, deg, surface.grid)
        K = _repair(K, deg, surface.grid)

    return SurfaceGeometry(surface=surface, E=E, F=F, G=G, detg=detg,
                           sqrt_detg=np.where(deg, 0.0, sg),
                           normal=np.stack([nx, ny, nz]),
                           L2=L2, M2=M2, N2=N2, H=H, K=K,
                           cross=np.stack([cx, cy, cz]), degenerate=deg)


def signed_volume(surface: Surface, ops: Operators) -> float:
    """Divergence-form signed volume (1/3) integral of x . (x_u cross x_v).

    Measures the volume between the surface and the cone connecting its
    boundary to the origin; negating z negates the result.
    """
    x, y, z = surface.x, surface.y, surface.z
    xu, yu, zu = ops.L_u @ x, ops.L_u @ y, ops.L_u @ z
    xv, yv, zv = ops.L_v @ x, ops.L_v @ y, ops.L_v @ z
    integrand = (x * (yu * zv - zu * yv)
                 + y * (zu * xv - xu * zv)
                 + z * (xu * yv - yu * xv))
    return float(ops.w @ integrand) / 3.0


def surface_integral(fld: np.ndarray, geom: SurfaceGeometry, ops: Operators) -> float:
    """Integral of a nodal field over the surface: w . (field * sqrt(EG - F^2))."""
    return float(ops.w @ (np.asarray(fld) * geom.sqrt_detg))


def laplace_beltrami_coeffs(geom: SurfaceGeometry, ops: Operators):
    """Coefficient fields (A0..A4) of the surface Laplacian in (u, v).

    For any smooth field phi,

        Lap_Sigma phi ~= A0*(L_uu phi) + A1*(L_uv phi) + A2*(L_vv phi)
                         + A3*(L_u phi) + A4*(L_v phi)

    with A0 = G/|g|, A1 = -2F/|g|, A2 = E/|g| and the divergence terms
    A3 = |g|^{-1/2} div(|g|^{-1/2} (G, -F)), A4 = |g|^{-1/2} div(|g|^{-1/2} (-F, E))
    evaluated by applying the spectral derivative operators to the assembled
    coefficient fields.  At degenerate boundary nodes the coefficients are
    zeroed (those operator rows are always replaced by boundary conditions)
    but the fields entering the divergences are smooth-limit repaired so that
    interior values stay clean.
    """
    deg = geom.degenerate
    E, F, G = geom.E, geom.F, geom.G
    safe_detg = np.where(deg, 1.0, geom.detg)
    sg = np.where(deg, 1.0, geom.sqrt_detg)

    P = np.where(deg, 0.0, G / sg)
    Q = np.where(deg, 0.0, F / sg)
    R = np.where(deg, 0.0, E / sg)
    if deg.any():
        grid = geom.grid
        P, Q, R = (_repair(f, deg, grid) for f in (P, Q, R))

    zero_deg = np.where(deg, 0.0, 1.0)
    A0 = zero_deg * G / safe_detg
    A1 = zero_deg * (-2.0) * F / safe_detg
    A2 = zero_deg * E / safe_detg
    inv_sg = zero_deg / sg
    A3 = inv_sg * (ops.L_u @ P - ops.L_v @ Q)
    A4 = inv_sg * (-(ops.L_u @ Q) + ops.L_v @ R)
    return A0, A1, A2, A3, A4


def laplace_beltrami_matrix(geom: SurfaceGeometry, ops: Operators) -> np.ndarray:
    """Dense k x k discretization of the surface Laplacian (no boundary rows)."""
    A0, A1, A2, A3, A4 = laplace_beltrami_coeffs(geom, ops)
    return (A0[:, None] * ops.L_uu + A1[:, None] * ops.L_uv + A2[:, None] * ops.L_vv
            + A3[:, None] * ops.L_u + A4[:, None] * ops.L_v)


def _repair(fld: np.ndarray, deg: np.ndarray, grid: Grid) -> np.ndarray:
    """Replace values at degenerate nodes by barycentric grid-line extrapolation.

    Averages the extrapolations along the u-line and the v-line through the
    node, skipping any other degenerate node on those lines.
    """
    out = fld.copy()
    F2 = out.reshape(grid.points_u, grid.points_v)
    D2 = deg.reshape(grid.points_u, grid.points_v)
    for i, j in zip(*np.nonzero(D2)):
        vals = []
        good = ~D2[:, j]
        if good.sum() >= 3:
            vals.append(barycentric_interpolate(grid.nodes_u[good], F2[good, j],
                                                float(grid.nodes_u[i])))
        good = ~D2[i, :]
        if good.sum() >= 3:
            vals.append(barycentric_interpolate(grid.nodes_v[good], F2[i, good],
                                                float(grid.nodes_v[j])))
        F2[i, j] = np.mean(vals) if vals else 0.0
    return out
