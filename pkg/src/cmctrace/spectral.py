"""Pseudospectral collocation operators on tensor-product grids.

One-dimensional Chebyshev (and periodic Fourier) differentiation matrices,
Clenshaw-Curtis quadrature weights, and their two-dimensional assemblies via
Kronecker products.

Vectorization convention
------------------------
A scalar field on the grid is stored as an array ``F`` of shape
``(points_u, points_v)`` with ``F[i, j] = f(u_i, v_j)`` and flattened in C
order (u-major, v fastest).  With that convention the 2-D operators are

    L_u  = D_u (x) I_v,      L_v  = I_u (x) D_v,
    L_uu = L_u L_u,          L_uv = L_u L_v,       L_vv = L_v L_v,

so ``(L_u @ f).reshape(pu, pv) == D_u @ F`` for every field ``f``.  All
modules in this package rely on this single ordering.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

CHEBYSHEV = "chebyshev"
FOURIER = "fourier"
_KINDS = (CHEBYSHEV, FOURIER)


def cheb_nodes(n: int, l: float) -> np.ndarray:
    """Chebyshev extrema nodes l*cos(i*pi/n), i = 0..n.

    Parameters
    ----------
    n : int
        Polynomial degree; returns n + 1 nodes.  Must be >= 1.
    l : float
        Half-length of the interval [-l, l].  Must be positive.

    Returns
    -------
    ndarray, shape (n + 1,)
        Strictly decreasing nodes with endpoints +l and -l.
    """
    _check_n_l(n, l)
    return l * np.cos(np.pi * np.arange(n + 1) / n)


def cheb_diff(n: int, l: float) -> np.ndarray:
    """First-derivative Chebyshev collocation matrix on ``cheb_nodes(n, l)``.

    Exact (to rounding) for polynomials of degree <= n.  The diagonal is
    built with the negative-sum trick so constants differentiate to zero
    exactly, which suppresses the O(n^2) rounding growth of the closed-form
    diagonal.

    Returns
    -------
    ndarray, shape (n + 1, n + 1)
    """
    _check_n_l(n, l)
    x = cheb_nodes(n, 1.0)
    i = np.arange(n + 1)
    c = np.ones(n + 1)
    c[0] = 2.0
    c[-1] = 2.0
    C = np.outer(c, 1.0 / c)
    sign = (-1.0) ** (i[:, None] + i[None, :])
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    D = C * sign / dx
    np.fill_diagonal(D, 0.0)
    np.fill_diagonal(D, -D.sum(axis=1))
    return D / l


def fourier_nodes(m: int, l: float) -> np.ndarray:
    """Equispaced nodes on the half-open period [-l, l); no duplicated endpoint."""
    _check_m_l(m, l)
    return -l + 2.0 * l * np.arange(m) / m


def fourier_diff(m: int, period: float) -> np.ndarray:
    """Spectral differentiation matrix for m equispaced periodic nodes.

    Standard even-order construction with cotangent entries; antisymmetric,
    and exact for trigonometric polynomials below the Nyquist wavenumber.

    Parameters
    ----------
    m : int
        Number of nodes; must be even and >= 2.
    period : float
        Length of the period the nodes cover.
    """
    if m < 2 or m % 2 != 0:
        raise ValueError(f"fourier_diff needs an even m >= 2, got {m}")
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    i = np.arange(m)
    diff = i[:, None] - i[None, :]
    h = 2.0 * np.pi / m
    with np.errstate(divide="ignore"):
        D = 0.5 * (-1.0) ** diff / np.tan(diff * h / 2.0)
    np.fill_diagonal(D, 0.0)
    return D * (2.0 * np.pi / period)


def fourier_diff2(m: int, period: float) -> np.ndarray:
    """Second-derivative spectral matrix for m equispaced periodic nodes.

    The explicit trigonometric formula, not the square of ``fourier_diff``:
    squaring the antisymmetric first-derivative matrix annihilates the
    Nyquist sawtooth mode (its conventional first derivative is zero), which
    plants a spurious low eigenvalue in any second-order operator built from
    it.  This matrix sends the Nyquist mode to -(m/2)^2 times itself.
    """
    if m < 2 or m % 2 != 0:
        raise ValueError(f"fourier_diff2 needs an even m >= 2, got {m}")
    if period <= 0:
        raise ValueError(f"period must be positive, got {period}")
    i = np.arange(m)
    diff = i[:, None] - i[None, :]
    h = 2.0 * np.pi / m
    with np.errstate(divide="ignore"):
        D2 = -0.5 * (-1.0) ** diff / np.sin(diff * h / 2.0) ** 2
    np.fill_diagonal(D2, -np.pi**2 / (3.0 * h**2) - 1.0 / 6.0)
    return D2 * (2.0 * np.pi / period) ** 2


def clenshaw_curtis(n: int, l: float) -> np.ndarray:
    """Clenshaw-Curtis quadrature weights on ``cheb_nodes(n, l)``.

    The returned weights are strictly positive and integrate polynomials of
    degree <= n over [-l, l] exactly.
    """
    _check_n_l(n, l)
    theta = np.pi * np.arange(n + 1) / n
    w = np.zeros(n + 1)
    ii = np.arange(1, n)
    v = np.ones(n - 1)
    if n % 2 == 0:
        w[0] = w[n] = 1.0 / (n**2 - 1)
        for k in range(1, n // 2):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4 * k**2 - 1)
        v -= np.cos(n * theta[ii]) / (n**2 - 1)
    else:
        w[0] = w[n] = 1.0 / n**2
        for k in range(1, (n - 1) // 2 + 1):
            v -= 2.0 * np.cos(2.0 * k * theta[ii]) / (4 * k**2 - 1)
    w[ii] = 2.0 * v / n
    return l * w


def fourier_weights(m: int, l: float) -> np.ndarray:
    """Trapezoidal weights on the periodic grid; spectrally accurate there."""
    _check_m_l(m, l)
    return np.full(m, 2.0 * l / m)


@dataclass(frozen=True)
class Grid:
    """Tensor-product collocation grid.

    ``n`` and ``m`` are the per-direction resolution parameters: a Chebyshev
    direction with parameter n carries n + 1 nodes, a Fourier direction with
    parameter m carries m nodes (m even).  ``l_u`` and ``l_v`` are the
    half-lengths of the parameter rectangle; a Fourier direction covers the
    half-open period [-l, l).
    """

    n: int
    m: int
    l_u: float
    l_v: float
    kind_u: str
    kind_v: str
    nodes_u: np.ndarray = field(repr=False)
    nodes_v: np.ndarray = field(repr=False)

    @property
    def points_u(self) -> int:
        return len(self.nodes_u)

    @property
    def points_v(self) -> int:
        return len(self.nodes_v)

    @property
    def k(self) -> int:
        """Length of every vectorized field on this grid."""
        return self.points_u * self.points_v

    def meshgrid(self) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized coordinate fields (u, v), each of length k."""
        U, V = np.meshgrid(self.nodes_u, self.nodes_v, indexing="ij")
        return U.ravel(), V.ravel()

    def reshape(self, f: np.ndarray) -> np.ndarray:
        """View a length-k field as its (points_u, points_v) value array."""
        return np.asarray(f).reshape(self.points_u, self.points_v)


def make_grid(n: int, m: int, l_u: float, l_v: float,
              kind_u: str = CHEBYSHEV, kind_v: str = CHEBYSHEV) -> Grid:
    """Build a Grid, validating node counts and direction kinds."""
    if kind_u not in _KINDS or kind_v not in _KINDS:
        raise ValueError(f"direction kinds must be one of {_KINDS}")
    nodes_u = cheb_nodes(n, l_u) if kind_u == CHEBYSHEV else fourier_nodes(n, l_u)
    nodes_v = cheb_nodes(m, l_v) if kind_v == CHEBYSHEV else fourier_nodes(m, l_v)
    return Grid(n=n, m=m, l_u=l_u, l_v=l_v, kind_u=kind_u, kind_v=kind_v,
                nodes_u=nodes_u, nodes_v=nodes_v)


@dataclass(frozen=True)
class Operators:
    """Dense 2-D differentiation operators, quadrature row and boundary mask.

    ``L_uu = L_u @ L_u`` and ``L_uv = L_u @ L_v`` hold exactly as assembled
    (they are formed as those products, equal to the Kronecker identities
    D_u^2 (x) I and D_u (x) D_v).  ``w`` integrates over the parameter
    rectangle; ``boundary_mask`` marks nodes with |u| = l_u or |v| = l_v on
    Chebyshev directions, while Fourier directions contribute no boundary.
    Instances are immutable and safe to share across threads.
    """

    grid: Grid
    L_u: np.ndarray = field(repr=False)
    L_v: np.ndarray = field(repr=False)
    L_uu: np.ndarray = field(repr=False)
    L_uv: np.ndarray = field(repr=False)
    L_vv: np.ndarray = field(repr=False)
    w: np.ndarray = field(repr=False)
    w_u: np.ndarray = field(repr=False)
    w_v: np.ndarray = field(repr=False)
    D_u: np.ndarray = field(repr=False)
    D_v: np.ndarray = field(repr=False)
    boundary_mask: np.ndarray = field(repr=False)

    @property
    def boundary_idx(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_mask)


def assemble(grid: Grid) -> Operators:
    """Assemble the 2-D operators for ``grid``.

    All five derivative operators, the integration row w = w_u (x) w_v, and
    the boundary mask, consistent with the module's vectorization order.
    """
    if grid.kind_u == CHEBYSHEV:
        D_u = cheb_diff(grid.n, grid.l_u)
        w_u = clenshaw_curtis(grid.n, grid.l_u)
    else:
        D_u = fourier_diff(grid.n, 2.0 * grid.l_u)
        w_u = fourier_weights(grid.n, grid.l_u)
    if grid.kind_v == CHEBYSHEV:
        D_v = cheb_diff(grid.m, grid.l_v)
        w_v = clenshaw_curtis(grid.m, grid.l_v)
    else:
        D_v = fourier_diff(grid.m, 2.0 * grid.l_v)
        w_v = fourier_weights(grid.m, grid.l_v)

    I_u = np.eye(grid.points_u)
    I_v = np.eye(grid.points_v)
    L_u = np.kron(D_u, I_v)
    L_v = np.kron(I_u, D_v)
    # Pure second derivatives: matrix squares for Chebyshev (the Kronecker
    # identity D^2 (x) I holds exactly as assembled); the dedicated
    # trigonometric matrix for Fourier, which handles the Nyquist mode.
    L_uu = L_u @ L_u if grid.kind_u == CHEBYSHEV else np.kron(
        fourier_diff2(grid.n, 2.0 * grid.l_u), I_v)
    L_vv = L_v @ L_v if grid.kind_v == CHEBYSHEV else np.kron(
        I_u, fourier_diff2(grid.m, 2.0 * grid.l_v))

    on_u_edge = np.zeros(grid.points_u, dtype=bool)
    on_v_edge = np.zeros(grid.points_v, dtype=bool)
    if grid.kind_u == CHEBYSHEV:
        on_u_edge[[0, -1]] = True
    if grid.kind_v == CHEBYSHEV:
        on_v_edge[[0, -1]] = True
    mask = (on_u_edge[:, None] | on_v_edge[None, :]).ravel()

    return Operators(grid=grid, L_u=L_u, L_v=L_v,
                     L_uu=L_uu, L_uv=L_u @ L_v, L_vv=L_vv,
                     w=np.kron(w_u, w_v), w_u=w_u, w_v=w_v,
                     D_u=D_u, D_v=D_v, boundary_mask=mask)


def barycentric_weights(nodes: np.ndarray) -> np.ndarray:
    """Barycentric interpolation weights for arbitrary distinct nodes.

    Computed from the product formula with the nodes rescaled to [-1, 1] to
    keep the partial products in range.
    """
    x = np.asarray(nodes, dtype=float)
    span = x.max() - x.min()
    if span <= 0:
        raise ValueError("nodes must be distinct")
    xs = 2.0 * (x - x.min()) / span - 1.0
    diff = xs[:, None] - xs[None, :]
    np.fill_diagonal(diff, 1.0)
    # work in logs to avoid under/overflow for large node counts
    logs = np.sum(np.log(np.abs(diff)), axis=1)
    signs = np.prod(np.sign(diff), axis=1)
    logs -= logs.mean()
    return signs * np.exp(-logs)


def barycentric_interpolate(nodes: np.ndarray, values: np.ndarray, x: float) -> float:
    """Evaluate the interpolant of (nodes, values) at x (x may be off-grid)."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    wgt = barycentric_weights(nodes)
    d = x - nodes
    hit = np.flatnonzero(np.abs(d) < 1e-14 * max(1.0, abs(x)))
    if hit.size:
        return float(values[hit[0]])
    q = wgt / d
    return float(np.sum(q * values) / np.sum(q))


def _check_n_l(n: int, l: float) -> None:
    if n < 1:
        raise ValueError(f"need n >= 1, got {n}")
    if l <= 0:
        raise ValueError(f"half-length must be positive, got {l}")


def _check_m_l(m: int, l: float) -> None:
    if m < 2 or m % 2 != 0:
        raise ValueError(f"Fourier direction needs an even node count >= 2, got {m}")
    if l <= 0:
        raise ValueError(f"half-length must be positive, got {l}")
