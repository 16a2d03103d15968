"""Discrete CMC system: residual, bordered Jacobian, tangent and stability.

The unknown surface is a normal graph x = x0 + phi * n0 over a converged base
surface.  The residual stacks the pointwise CMC equation 2H(phi) - lambda on
interior nodes, the boundary conditions on edge nodes (bordering), and the
volume constraint V(phi) - V as the final row.  The Jacobian's phi-block is
the Jacobi operator Lap_Sigma + (4H^2 - 2K) with boundary rows replaced; the
same bordered matrix drives the branch tangent and the twisted-eigenvalue
stability solve.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.linalg as sla

from .errors import (AtBifurcationError, NumericalFailureError,
                     StepFailureError)
from .geometry import (Surface, SurfaceGeometry, fundamental_forms,
                       laplace_beltrami_matrix, signed_volume)
from .spectral import CHEBYSHEV, Grid, Operators

DIRICHLET = "dirichlet"
NEUMANN = "neumann"
PERIODIC = "periodic"

SPURIOUS_EIGENVALUE_THRESHOLD = 1e8


@dataclass(frozen=True)
class BoundaryConditionSet:
    """Per-edge conditions for the four logical edges of the parameter rectangle.

    Edge names refer to coordinate values: ``u_hi`` is u = +l_u, ``u_lo`` is
    u = -l_u, and similarly in v.  Periodic must appear on both or neither
    edge of an opposing pair, and a periodic direction must use Fourier nodes.
    Corner nodes take the Dirichlet condition when any adjacent edge is
    Dirichlet.
    """

    u_lo: str = DIRICHLET
    u_hi: str = DIRICHLET
    v_lo: str = DIRICHLET
    v_hi: str = DIRICHLET

    def __post_init__(self):
        for name in ("u_lo", "u_hi", "v_lo", "v_hi"):
            val = getattr(self, name)
            if val not in (DIRICHLET, NEUMANN, PERIODIC):
                raise ValueError(f"unknown boundary condition {val!r} on {name}")
        if (self.u_lo == PERIODIC) != (self.u_hi == PERIODIC):
            raise ValueError("periodic must be set on both u edges or neither")
        if (self.v_lo == PERIODIC) != (self.v_hi == PERIODIC):
            raise ValueError("periodic must be set on both v edges or neither")

    def validate_grid(self, grid: Grid) -> None:
        if (self.u_lo == PERIODIC) != (grid.kind_u != CHEBYSHEV):
            raise ValueError("periodic u edges require Fourier nodes in u (and vice versa)")
        if (self.v_lo == PERIODIC) != (grid.kind_v != CHEBYSHEV):
            raise ValueError("periodic v edges require Fourier nodes in v (and vice versa)")


@dataclass(frozen=True)
class VolumeModel:
    """Problem-specific volume functional built on the signed-volume integral.

    volume(X) = sign * (1/3) int x . (x_u cross x_v) + offset + closure(X)

    The raw divergence-form integral measures the region bounded by the
    surface and the cone over its boundary; ``sign`` and ``offset`` reorient
    and shift it (e.g. a tube parameterized with inward normal, closed by the
    fixed cones over its rings), and ``closure`` adds boundary pieces that
    move with the surface (e.g. the wall patches of a drop between plates).
    The derivative row of the functional is sign * w^T diag(sqrt|g|) either
    way, because normal motion sweeps volume at rate int psi sqrt|g|.
    """

    sign: float = 1.0
    offset: float = 0.0
    closure: Optional[Callable[[Surface, Operators], float]] = None


EQ2_VOLUME = VolumeModel()


@dataclass(frozen=True)
class BaseState:
    """A converged CMC surface with its geometry and parameter values."""

    surface0: Surface
    geom0: SurfaceGeometry
    lambda0: float
    volume0: float

    @property
    def normal0(self) -> np.ndarray:
        return self.geom0.normal

    @property
    def grid(self) -> Grid:
        return self.surface0.grid


def make_base_state(surface: Surface, lam: float, ops: Operators,
                    vol: VolumeModel = EQ2_VOLUME) -> BaseState:
    """Bundle a surface into a BaseState, computing its geometry and volume."""
    geom = fundamental_forms(surface, ops)
    return BaseState(surface0=surface, geom0=geom, lambda0=lam,
                     volume0=problem_volume(surface, ops, vol))


@dataclass
class UnknownTriple:
    """Corrector unknowns: normal displacement, pressure and target volume."""

    phi: np.ndarray
    lam: float
    volume: float


@dataclass(frozen=True)
class StabilityReport:
    """Finite twisted eigenvalues, Morse index and bifurcation test functional.

    ``eigenvalues`` are sorted ascending; ``index`` counts the negative ones;
    ``beta`` is the sign of their product.  ``critical_mode`` (when requested)
    is the full-grid eigenvector of the smallest-magnitude eigenvalue,
    normalized to unit Euclidean length.
    """

    eigenvalues: np.ndarray = field(repr=False)
    index: int = 0
    beta: int = 1
    critical_mode: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def mu_min(self) -> float:
        """Smallest (most negative) finite eigenvalue."""
        return float(self.eigenvalues[0])

    @property
    def mu0(self) -> float:
        """Signed value of the smallest-magnitude finite eigenvalue."""
        i = int(np.argmin(np.abs(self.eigenvalues)))
        return float(self.eigenvalues[i])


# --------------------------------------------------------------------------
# boundary-condition layout
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class _BCLayout:
    dirichlet_idx: np.ndarray
    neumann_idx: np.ndarray
    neumann_rows: np.ndarray        # (len(neumann_idx), k) outward derivative rows
    constrained_idx: np.ndarray     # dirichlet + neumann, sorted
    interior_ind: np.ndarray        # float indicator, 1 on unconstrained rows


def bc_layout(grid: Grid, ops: Operators, bc: BoundaryConditionSet) -> _BCLayout:
    """Resolve per-node boundary conditions.

    Dirichlet wins at corners where a Dirichlet and a Neumann edge meet; a
    corner between two Neumann edges takes the later edge in the fixed order
    (u_hi, u_lo, v_hi, v_lo).  Periodic directions contribute no rows.
    """
    bc.validate_grid(grid)
    pu, pv = grid.points_u, grid.points_v
    cond = np.zeros((pu, pv), dtype=np.int8)       # 0 interior, 1 dirichlet, 2 neumann
    neumann_dir = np.zeros((pu, pv, 2))            # outward (du, dv) of the claiming edge
    # Chebyshev nodes descend from +l to -l: index 0 is the "hi" edge.
    edges = []
    if grid.kind_u == CHEBYSHEV:
        edges.append((bc.u_hi, (0, slice(None)), 0, +1.0))
        edges.append((bc.u_lo, (pu - 1, slice(None)), 0, -1.0))
    if grid.kind_v == CHEBYSHEV:
        edges.append((bc.v_hi, (slice(None), 0), 1, +1.0))
        edges.append((bc.v_lo, (slice(None), pv - 1), 1, -1.0))

    for name, sl, axis, sign in edges:
        if name == PERIODIC:
            continue
        if name == DIRICHLET:
            cond[sl] = 1
        else:
            claim = cond[sl] != 1
            cond[sl][claim] = 2
            neumann_dir[sl][claim, :] = 0.0
            neumann_dir[sl][claim, axis] = sign

    cond_f = cond.ravel()
    dir_idx = np.flatnonzero(cond_f == 1)
    neu_idx = np.flatnonzero(cond_f == 2)
    rows = np.zeros((len(neu_idx), grid.k))
    info = neumann_dir.reshape(-1, 2)
    for r, p in enumerate(neu_idx):
        du, dv = info[p]
        rows[r] = du * ops.L_u[p] if du != 0.0 else dv * ops.L_v[p]
    constrained = np.sort(np.concatenate([dir_idx, neu_idx]))
    interior_ind = np.ones(grid.k)
    interior_ind[constrained] = 0.0
    return _BCLayout(dirichlet_idx=dir_idx, neumann_idx=neu_idx,
                     neumann_rows=rows, constrained_idx=constrained,
                     interior_ind=interior_ind)


# --------------------------------------------------------------------------
# residual / Jacobian
# --------------------------------------------------------------------------

def normal_graph(base: BaseState, phi: np.ndarray) -> Surface:
    """Surface x0 + phi * n0, displacing the base along its unit normal."""
    n0 = base.normal0
    s0 = base.surface0
    return Surface(grid=s0.grid, x=s0.x + phi * n0[0],
                   y=s0.y + phi * n0[1], z=s0.z + phi * n0[2])


def problem_volume(surface: Surface, ops: Operators,
                   vol: VolumeModel = EQ2_VOLUME) -> float:
    """Evaluate a VolumeModel on a surface."""
    v = vol.sign * signed_volume(surface, ops) + vol.offset
    if vol.closure is not None:
        v += vol.closure(surface, ops)
    return v


def residual(base: BaseState, trial: UnknownTriple, ops: Operators,
             bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME) -> np.ndarray:
    """Length k+1 residual of the bordered discrete system.

    Interior rows carry 2H(phi) - lambda of the normal-graph surface,
    Dirichlet rows carry phi, Neumann rows the outward normal derivative of
    phi, and the final row carries volume(phi) - V.
    """
    surface = normal_graph(base, trial.phi)
    geom = fundamental_forms(surface, ops)
    layout = bc_layout(base.grid, ops, bc)
    return _residual_from(geom, trial, ops, layout, vol)


def _residual_from(geom: SurfaceGeometry, trial: UnknownTriple, ops: Operators,
                   layout: _BCLayout, vol: VolumeModel) -> np.ndarray:
    k = geom.grid.k
    r = np.empty(k + 1)
    r[:k] = 2.0 * geom.H - trial.lam
    r[layout.dirichlet_idx] = trial.phi[layout.dirichlet_idx]
    if len(layout.neumann_idx):
        r[layout.neumann_idx] = layout.neumann_rows @ trial.phi
    r[k] = problem_volume(geom.surface, ops, vol) - trial.volume
    return r


def _operator_with_bc(geom: SurfaceGeometry, ops: Operators,
                      layout: _BCLayout) -> np.ndarray:
    """Jacobi operator rows with boundary rows replaced by condition rows."""
    L = laplace_beltrami_matrix(geom, ops)
    pot = 4.0 * geom.H**2 - 2.0 * geom.K
    L[np.arange(geom.grid.k), np.arange(geom.grid.k)] += pot
    L[layout.dirichlet_idx, :] = 0.0
    L[layout.dirichlet_idx, layout.dirichlet_idx] = 1.0
    if len(layout.neumann_idx):
        L[layout.neumann_idx, :] = layout.neumann_rows
    return L


def jacobi_operator(base: BaseState, ops: Operators,
                    bc: BoundaryConditionSet) -> np.ndarray:
    """k x k operator: Lap_Sigma + (4H^2 - 2K) on interior rows, bc rows inserted."""
    layout = bc_layout(base.grid, ops, bc)
    return _operator_with_bc(base.geom0, ops, layout)


def _jacobian_from(geom: SurfaceGeometry, ops: Operators, layout: _BCLayout,
                   vol: VolumeModel) -> np.ndarray:
    k = geom.grid.k
    J = np.zeros((k + 1, k + 2))
    J[:k, :k] = _operator_with_bc(geom, ops, layout)
    J[:k, k] = -layout.interior_ind
    J[k, :k] = vol.sign * (ops.w * geom.sqrt_detg)
    J[k, k + 1] = -1.0
    return J


def jacobian(base: BaseState, trial: UnknownTriple, ops: Operators,
             bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME) -> np.ndarray:
    """(k+1) x (k+2) bordered Jacobian, constructed at the trial point."""
    surface = normal_graph(base, trial.phi)
    geom = fundamental_forms(surface, ops)
    layout = bc_layout(base.grid, ops, bc)
    return _jacobian_from(geom, ops, layout, vol)


def _bordered_matrix(base: BaseState, ops: Operators, layout: _BCLayout,
                     vol: VolumeModel) -> np.ndarray:
    """Square bordered matrix J_p = [[-L, 1_b], [sign * w diag(sqrt|g|), 0]]."""
    k = base.grid.k
    Jp = np.empty((k + 1, k + 1))
    Jp[:k, :k] = -_operator_with_bc(base.geom0, ops, layout)
    Jp[:k, k] = layout.interior_ind
    Jp[k, :k] = vol.sign * (ops.w * base.geom0.sqrt_detg)
    Jp[k, k] = 0.0
    return Jp


def tangent(base: BaseState, ops: Operators, bc: BoundaryConditionSet,
            vol: VolumeModel = EQ2_VOLUME) -> np.ndarray:
    """Unit tangent to the solution branch at a converged base point.

    Solves the bordered system J_p t_p = e_last (i.e. the null-space problem
    with W = 1) and renormalizes the triple (psi, Lambda, 1) in the Euclidean
    norm.  The pre-normalization W component is +1, so before any orientation
    flip the tangent points toward increasing volume.
    """
    layout = bc_layout(base.grid, ops, bc)
    Jp = _bordered_matrix(base, ops, layout, vol)
    rhs = np.zeros(base.grid.k + 1)
    rhs[-1] = 1.0
    try:
        tp = sla.solve(Jp, rhs)
    except sla.LinAlgError as exc:
        raise AtBifurcationError(f"bordered tangent system is singular: {exc}") from exc
    if not np.all(np.isfinite(tp)):
        raise AtBifurcationError("bordered tangent system is numerically singular")
    t = np.concatenate([tp, [1.0]])
    return t / np.linalg.norm(t)


# --------------------------------------------------------------------------
# twisted eigenvalue problem
# --------------------------------------------------------------------------

def stability(base: BaseState, ops: Operators, bc: BoundaryConditionSet,
              vol: VolumeModel = EQ2_VOLUME, want_mode: bool = False,
              method: str = "reduced") -> StabilityReport:
    """Twisted Dirichlet eigenvalues of the base surface.

    The generalized problem J_p v = mu B v (B the identity zeroed on boundary
    rows, with zero border row) carries the volume-preserving second-variation
    spectrum plus spurious infinite eigenvalues from the constraint rows.

    method="reduced" (default) eliminates the boundary rows and projects out
    the zero-mean constraint, yielding an exactly equivalent standard dense
    eigenproblem of dimension (#interior - 1); method="qz" solves the literal
    generalized pencil and filters non-finite eigenvalues and |mu| above
    ``SPURIOUS_EIGENVALUE_THRESHOLD``.
    """
    layout = bc_layout(base.grid, ops, bc)
    if method == "qz":
        return _stability_qz(base, ops, layout, vol, want_mode)
    if method != "reduced":
        raise ValueError(f"unknown stability method {method!r}")
    return _stability_reduced(base, ops, layout, vol, want_mode)


def _report(kept: np.ndarray, mode: Optional[np.ndarray]) -> StabilityReport:
    kept = np.sort(kept)
    index = int(np.sum(kept < 0.0))
    beta = 1 if index % 2 == 0 else -1
    return StabilityReport(eigenvalues=kept, index=index, beta=beta,
                           critical_mode=mode)


def _stability_reduced(base: BaseState, ops: Operators, layout: _BCLayout,
                       vol: VolumeModel, want_mode: bool) -> StabilityReport:
    k = base.grid.k
    L = _operator_with_bc(base.geom0, ops, layout)
    wt = ops.w * base.geom0.sqrt_detg
    bnd = layout.constrained_idx
    itr = np.setdiff1d(np.arange(k), bnd)

    if len(bnd):
        try:
            X = sla.solve(L[np.ix_(bnd, bnd)], L[np.ix_(bnd, itr)])
        except sla.LinAlgError as exc:
            raise NumericalFailureError(f"boundary elimination failed: {exc}") from exc
        A = -(L[np.ix_(itr, itr)] - L[np.ix_(itr, bnd)] @ X)
        c = wt[itr] - wt[bnd] @ X
    else:
        X = np.zeros((0, len(itr)))
        A = -L
        c = wt

    chat = c / np.linalg.norm(c)
    ct1 = float(np.sum(c))
    if abs(ct1) < 1e-300:
        raise NumericalFailureError("volume constraint row annihilates constants")
    # Householder reflector: columns 2.. span the zero-mean subspace ker(c^T)
    vref = chat.copy()
    vref[0] += np.sign(chat[0]) if chat[0] != 0 else 1.0
    vref /= np.linalg.norm(vref)
    ni = len(c)
    AZ = A - 2.0 * np.outer(A @ vref, vref)                 # A @ Hc
    Z_T_AZ = AZ - 2.0 * np.outer(vref, vref @ AZ)           # Hc @ A @ Hc
    ones_i = np.ones(ni)
    z1 = ones_i - 2.0 * vref * np.sum(vref)                 # Hc @ 1
    cAZ = (c @ AZ)
    R = Z_T_AZ[1:, 1:] - np.outer(z1[1:], cAZ[1:]) / ct1

    try:
        if want_mode:
            evals, evecs = sla.eig(R, right=True)
        else:
            evals = sla.eig(R, right=False)
            evecs = None
    except sla.LinAlgError as exc:
        raise NumericalFailureError(f"eigensolver failed: {exc}") from exc

    finite = np.isfinite(evals) & (np.abs(evals) <= SPURIOUS_EIGENVALUE_THRESHOLD)
    kept = np.real(evals[finite])

    mode = None
    if want_mode:
        j = int(np.argmin(np.abs(evals[finite])))
        src = np.flatnonzero(finite)[j]
        y = np.real(evecs[:, src])
        yfull = np.concatenate([[0.0], y])
        phi_i = yfull - 2.0 * vref * (vref @ yfull)          # Hc @ [0; y] = Z @ y
        phi = np.zeros(k)
        phi[itr] = phi_i
        if len(bnd):
            phi[bnd] = -X @ phi_i
        phi /= np.linalg.norm(phi)
        mode = phi
    return _report(kept, mode)


def _stability_qz(base: BaseState, ops: Operators, layout: _BCLayout,
                  vol: VolumeModel, want_mode: bool) -> StabilityReport:
    k = base.grid.k
    Jp = _bordered_matrix(base, ops, layout, vol)
    B = np.zeros_like(Jp)
    diag = layout.interior_ind.copy()
    B[np.arange(k), np.arange(k)] = diag
    try:
        if want_mode:
            evals, evecs = sla.eig(Jp, B, right=True)
        else:
            evals = sla.eig(Jp, B, right=False)
            evecs = None
    except sla.LinAlgError as exc:
        raise NumericalFailureError(f"generalized eigensolver failed: {exc}") from exc
    finite = np.isfinite(evals) & (np.abs(evals) <= SPURIOUS_EIGENVALUE_THRESHOLD)
    kept = np.real(evals[finite])
    mode = None
    if want_mode:
        j = int(np.argmin(np.abs(evals[finite])))
        src = np.flatnonzero(finite)[j]
        phi = np.real(evecs[:k, src])
        phi /= np.linalg.norm(phi)
        mode = phi
    return _report(kept, mode)


# --------------------------------------------------------------------------
# Moore-Penrose Newton corrector
# --------------------------------------------------------------------------

@dataclass
class CorrectorResult:
    trial: UnknownTriple
    surface: Surface
    geom: SurfaceGeometry
    iterations: int
    residual_norm: float


def newton_correct(base: BaseState, trial: UnknownTriple, ops: Operators,
                   bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME,
                   tol: float = 1e-10, max_iters: int = 10) -> CorrectorResult:
    """Minimum-norm Newton iteration eta <- eta - J(eta)^+ f_d(eta).

    The pseudoinverse step is computed from the economy QR factorization of
    the Jacobian transpose (never by forming J^+), giving the minimum-norm
    solution of the underdetermined correction equations.

    Raises
    ------
    StepFailureError
        If the residual has not dropped below ``tol`` after ``max_iters``
        Newton iterations, or the iteration produced non-finite values.
    """
    layout = bc_layout(base.grid, ops, bc)
    phi = np.array(trial.phi, dtype=float, copy=True)
    lam = float(trial.lam)
    volume = float(trial.volume)
    for it in range(max_iters + 1):
        surface = normal_graph(base, UnknownTriple(phi, lam, volume).phi)
        geom = fundamental_forms(surface, ops)
        r = _residual_from(geom, UnknownTriple(phi, lam, volume), ops, layout, vol)
        rnorm = float(np.max(np.abs(r)))
        if not np.isfinite(rnorm):
            raise StepFailureError("corrector produced non-finite residual")
        if rnorm < tol:
            return CorrectorResult(UnknownTriple(phi, lam, volume), surface,
                                   geom, it, rnorm)
        if it == max_iters:
            raise StepFailureError(
                f"corrector stalled at |f|={rnorm:.3e} after {max_iters} iterations")
        J = _jacobian_from(geom, ops, layout, vol)
        try:
            Q, R = sla.qr(J.T, mode="economic")
            ymid = sla.solve_triangular(R.T, -r, lower=True)
        except (sla.LinAlgError, ValueError) as exc:
            raise StepFailureError(f"corrector linear solve failed: {exc}") from exc
        d = Q @ ymid
        phi = phi + d[:base.grid.k]
        lam += float(d[base.grid.k])
        volume += float(d[base.grid.k + 1])
    raise StepFailureError("unreachable")
