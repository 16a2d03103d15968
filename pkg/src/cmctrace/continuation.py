"""Pseudo-arclength branch tracing with stability monitoring.

Euler predictor along the branch tangent, Moore-Penrose Newton corrector,
orientation-preserving re-basing, step-length adaptation, detection of
stability changes, secant refinement of bifurcation points, and switching
onto bifurcating branches via the critical eigenvector.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (CmcTraceError, RefinementFailureError, StepFailureError,
                     SwitchFailureError)
from .geometry import Surface
from .spectral import Operators
from .system import (EQ2_VOLUME, BaseState, BoundaryConditionSet,
                     StabilityReport, UnknownTriple, VolumeModel,
                     make_base_state, newton_correct, stability, tangent)

FAST_ITERS = 3          # corrector iteration count considered "fast"
GROW_FACTOR = 1.3       # step growth after repeated fast convergence
MAX_SECANT_EVALS = 40


@dataclass(frozen=True)
class ContinuationConfig:
    """Tracing parameters; defaults follow the solver's benchmark tolerances."""

    h: float = 0.1
    max_steps: int = 100
    newton_tol: float = 1e-10
    newton_max_iters: int = 10
    min_step: float = 1e-4
    bifurcation_refine_tol: float = 1e-7
    adapt: bool = False
    refine_bifurcations: bool = True
    v_min: Optional[float] = None       # halt once the branch exits [v_min, v_max]
    v_max: Optional[float] = None

    def __post_init__(self):
        if self.h == 0.0:
            raise ValueError("step length h must be nonzero")
        if abs(self.h) < self.min_step:
            raise ValueError("need |h| >= min_step")
        if self.newton_tol <= 0:
            raise ValueError("newton_tol must be positive")


@dataclass
class BranchPoint:
    """A converged solution on the branch.

    ``tangent_used`` is the oriented unit tangent at this point (it drives the
    next predictor); ``phi`` is the normal displacement from the previous base
    that produced this surface.
    """

    base: BaseState
    stability: StabilityReport
    tangent_used: np.ndarray = field(repr=False)
    arc_index: int = 0
    phi: np.ndarray = field(default=None, repr=False)
    newton_iters: int = 0

    @property
    def surface(self) -> Surface:
        return self.base.surface0

    @property
    def lam(self) -> float:
        return self.base.lambda0

    @property
    def volume(self) -> float:
        return self.base.volume0

    @property
    def z_max(self) -> float:
        return float(np.max(self.base.surface0.z))


@dataclass
class BranchEvent:
    step: int                       # index of the point closing the bracket
    kind: str                       # "beta-sign-change" | "fold-suspected" | "step-failure"
    v_star: Optional[float] = None
    point: Optional[BranchPoint] = None
    message: str = ""


@dataclass
class Branch:
    points: list[BranchPoint] = field(default_factory=list)
    events: list[BranchEvent] = field(default_factory=list)


def _correct_from_prediction(base: BaseState, prediction: np.ndarray,
                             config: ContinuationConfig, ops: Operators,
                             bc: BoundaryConditionSet, vol: VolumeModel):
    k = base.grid.k
    trial = UnknownTriple(phi=prediction[:k], lam=float(prediction[k]),
                          volume=float(prediction[k + 1]))
    return newton_correct(base, trial, ops, bc, vol,
                          tol=config.newton_tol,
                          max_iters=config.newton_max_iters)


def _finish_point(result, ops, bc, vol, orient_against: np.ndarray,
                  arc_index: int) -> BranchPoint:
    new_base = make_base_state(result.surface, result.trial.lam, ops, vol)
    stab = stability(new_base, ops, bc, vol)
    t_new = tangent(new_base, ops, bc, vol)
    if orient_against is not None and float(t_new @ orient_against) < 0.0:
        t_new = -t_new
    return BranchPoint(base=new_base, stability=stab, tangent_used=t_new,
                       arc_index=arc_index, phi=result.trial.phi,
                       newton_iters=result.iterations)


def start_point(start: BaseState, config: ContinuationConfig, ops: Operators,
                bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME) -> BranchPoint:
    """Wrap a converged base state as the branch's initial point."""
    stab = stability(start, ops, bc, vol)
    t0 = tangent(start, ops, bc, vol)
    return BranchPoint(base=start, stability=stab, tangent_used=t0,
                       arc_index=0, phi=np.zeros(start.grid.k), newton_iters=0)


def step(base: BaseState, config: ContinuationConfig, ops: Operators,
         bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME,
         prev_tangent: Optional[np.ndarray] = None,
         h: Optional[float] = None) -> BranchPoint:
    """One predictor-corrector step from a converged base.

    Predicts (psi, Lambda, W) = (0, lambda0, V0) + h * t and corrects with the
    minimum-norm Newton iteration; the returned point has been re-based (its
    surface is the new x0).  Raises StepFailureError on corrector divergence;
    the caller is expected to halve h and retry.
    """
    t = tangent(base, ops, bc, vol)
    if prev_tangent is not None and float(t @ prev_tangent) < 0.0:
        t = -t
    h_eff = config.h if h is None else h
    k = base.grid.k
    prediction = np.concatenate([np.zeros(k), [base.lambda0, base.volume0]]) + h_eff * t
    result = _correct_from_prediction(base, prediction, config, ops, bc, vol)
    return _finish_point(result, ops, bc, vol, orient_against=t, arc_index=0)


def trace(start: BaseState, config: ContinuationConfig, ops: Operators,
          bc: BoundaryConditionSet, vol: VolumeModel = EQ2_VOLUME,
          log: Optional[Callable[[str], None]] = None) -> Branch:
    """Trace a branch from a converged start state.

    Repeatedly applies the predictor-corrector step, re-basing at every
    accepted point, recording a StabilityReport per point and flagging
    stability changes between consecutive points (refined to V* by secant
    iteration when ``config.refine_bifurcations`` is set).  Consecutive
    tangents keep a positive dot product; a sign change of the tangent's
    volume component is flagged as a suspected fold.  Step length is halved
    on corrector failure down to ``min_step`` (and grown back after repeated
    fast convergence when ``config.adapt`` is set).
    """
    branch = Branch()
    current = start_point(start, config, ops, bc, vol)
    branch.points.append(current)
    h = config.h
    fast_streak = 0

    for arc in range(1, config.max_steps + 1):
        accepted = None
        while True:
            k = current.base.grid.k
            t = current.tangent_used
            prediction = np.concatenate(
                [np.zeros(k), [current.lam, current.volume]]) + h * t
            try:
                result = _correct_from_prediction(current.base, prediction,
                                                  config, ops, bc, vol)
            except CmcTraceError as exc:
                if abs(h) / 2.0 >= config.min_step:
                    h /= 2.0
                    if log:
                        log(f"step {arc}: corrector failed ({exc}); h -> {h:+.3e}")
                    continue
                branch.events.append(BranchEvent(step=arc, kind="step-failure",
                                                 message=str(exc)))
                return branch
            accepted = _finish_point(result, ops, bc, vol,
                                      orient_against=t, arc_index=arc)
            break

        prev = current
        branch.points.append(accepted)
        current = accepted

        if log:
            log(f"step {arc}: V={accepted.volume:+.8f} lambda={accepted.lam:+.8f} "
                f"index={accepted.stability.index} iters={accepted.newton_iters}")

        if accepted.stability.index != prev.stability.index:
            event = BranchEvent(step=arc, kind="beta-sign-change")
            if config.refine_bifurcations:
                try:
                    v_star, at_point = refine_bifurcation(
                        prev, accepted, config, ops, bc, vol)
                    event.v_star = v_star
                    event.point = at_point
                except CmcTraceError as exc:
                    event.message = f"refinement failed: {exc}"
            branch.events.append(event)

        if float(accepted.tangent_used[-1]) * float(prev.tangent_used[-1]) < 0.0:
            branch.events.append(BranchEvent(step=arc, kind="fold-suspected"))

        if config.adapt:
            if accepted.newton_iters <= FAST_ITERS:
                fast_streak += 1
                if fast_streak >= 3 and abs(h) * GROW_FACTOR <= abs(config.h):
                    h *= GROW_FACTOR
                    fast_streak = 0
            else:
                fast_streak = 0

        if config.v_max is not None and accepted.volume > config.v_max:
            break
        if config.v_min is not None and accepted.volume < config.v_min:
            break

    return branch


def refine_bifurcation(point_a: BranchPoint, point_b: BranchPoint,
                       config: ContinuationConfig, ops: Operators,
                       bc: BoundaryConditionSet,
                       vol: VolumeModel = EQ2_VOLUME) -> tuple[float, BranchPoint]:
    """Locate the stability change between two consecutive points.

    Secant iteration on the smallest-magnitude twisted eigenvalue mu0 as a
    function of arc length from ``point_a`` (with bisection safeguarding),
    re-converging a solution at every trial, until successive volume
    estimates differ by less than ``config.bifurcation_refine_tol``.

    Returns (V*, converged point at the crossing).
    """
    mu_a = point_a.stability.mu0
    mu_b = point_b.stability.mu0
    if np.sign(mu_a) == np.sign(mu_b):
        raise RefinementFailureError(
            f"no mu0 sign change in bracket: {mu_a:.3e} vs {mu_b:.3e}")

    base = point_a.base
    t = point_a.tangent_used
    s_b = float((point_b.volume - point_a.volume) / t[-1]) if t[-1] != 0 else config.h
    k = base.grid.k

    def evaluate(s: float):
        prediction = np.concatenate(
            [np.zeros(k), [base.lambda0, base.volume0]]) + s * t
        result = _correct_from_prediction(base, prediction, config, ops, bc, vol)
        new_base = make_base_state(result.surface, result.trial.lam, ops, vol)
        stab = stability(new_base, ops, bc, vol)
        pt = BranchPoint(base=new_base, stability=stab,
                         tangent_used=point_a.tangent_used,
                         arc_index=point_a.arc_index, phi=result.trial.phi,
                         newton_iters=result.iterations)
        return pt

    lo, mu_lo = 0.0, mu_a
    hi, mu_hi = s_b, mu_b
    s_prev, mu_prev = lo, mu_lo
    s_cur, mu_cur = hi, mu_hi
    v_prev = point_a.volume
    best = point_b

    for _ in range(MAX_SECANT_EVALS):
        denom = mu_cur - mu_prev
        if denom != 0.0 and np.isfinite(denom):
            s_next = s_cur - mu_cur * (s_cur - s_prev) / denom
        else:
            s_next = 0.5 * (lo + hi)
        inside = min(lo, hi) < s_next < max(lo, hi)
        if not inside or not np.isfinite(s_next):
            s_next = 0.5 * (lo + hi)
        try:
            pt = evaluate(s_next)
        except CmcTraceError:
            s_next = 0.5 * (lo + hi)
            pt = evaluate(s_next)
        mu_next = pt.stability.mu0
        best = pt
        if abs(pt.volume - v_prev) < config.bifurcation_refine_tol:
            return float(pt.volume), pt
        v_prev = pt.volume
        if np.sign(mu_next) == np.sign(mu_lo):
            lo, mu_lo = s_next, mu_next
        else:
            hi, mu_hi = s_next, mu_next
        s_prev, mu_prev = s_cur, mu_cur
        s_cur, mu_cur = s_next, mu_next

    raise RefinementFailureError(
        f"secant refinement did not meet tol {config.bifurcation_refine_tol} "
        f"in {MAX_SECANT_EVALS} evaluations")


def locate_bifurcation(branch: Branch, bracket: tuple[BranchPoint, BranchPoint],
                       config: ContinuationConfig, ops: Operators,
                       bc: BoundaryConditionSet,
                       vol: VolumeModel = EQ2_VOLUME) -> float:
    """Refine the stability crossing inside ``bracket`` and return V*."""
    v_star, _ = refine_bifurcation(bracket[0], bracket[1], config, ops, bc, vol)
    return v_star


def branch_switch(base_at_bifurcation: BaseState, config: ContinuationConfig,
                  ops: Operators, bc: BoundaryConditionSet,
                  vol: VolumeModel = EQ2_VOLUME, direction: int = +1,
                  symmetry_defect: Optional[Callable[[Surface], float]] = None) -> BranchPoint:
    """Step onto a bifurcating branch using the critical eigenvector.

    The predictor direction is the normalized critical eigenvector embedded
    as (v, 0, 0) in the bordered unknowns (no lambda or V component), stepped
    by direction * h and corrected as usual.  If a symmetry-defect functional
    is supplied and the corrected point falls back onto the symmetric branch
    (defect <= 10 * newton_tol), the step is retried with doubled h, up to
    three doublings.
    """
    stab = stability(base_at_bifurcation, ops, bc, vol, want_mode=True)
    mode = stab.critical_mode
    k = base_at_bifurcation.grid.k
    t_switch = np.concatenate([mode, [0.0, 0.0]])
    h = float(direction) * config.h
    last_exc = None
    for attempt in range(4):
        prediction = np.concatenate(
            [np.zeros(k),
             [base_at_bifurcation.lambda0, base_at_bifurcation.volume0]]) + h * t_switch
        try:
            result = _correct_from_prediction(base_at_bifurcation, prediction,
                                              config, ops, bc, vol)
        except CmcTraceError as exc:
            last_exc = exc
            h *= 2.0
            continue
        point = _finish_point(result, ops, bc, vol,
                              orient_against=t_switch, arc_index=0)
        if symmetry_defect is not None:
            defect = symmetry_defect(point.surface)
            if defect <= 10.0 * config.newton_tol:
                last_exc = StepFailureError(
                    f"corrector fell back onto the symmetric branch (defect={defect:.3e})")
                h *= 2.0
                continue
        return point
    raise SwitchFailureError(f"branch switch failed after 3 doublings: {last_exc}")
