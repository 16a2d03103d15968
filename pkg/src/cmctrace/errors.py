"""Exception types shared across the solver."""


class CmcTraceError(Exception):
    """Base class for all solver errors."""


class DegenerateSurfaceError(CmcTraceError):
    """Surface lost regularity (EG - F^2 <= tol) at an interior node."""

    def __init__(self, node: int, detg: float):
        self.node = node
        self.detg = detg
        super().__init__(f"degenerate surface at node {node} (EG - F^2 = {detg:.3e})")


class AtBifurcationError(CmcTraceError):
    """Bordered tangent system is singular; the base point sits on a bifurcation."""


class StepFailureError(CmcTraceError):
    """Predictor-corrector step did not converge."""


class RefinementFailureError(CmcTraceError):
    """Bifurcation refinement lost its sign-change bracket."""


class SwitchFailureError(CmcTraceError):
    """Branch switching kept falling back onto the symmetric branch."""


class NumericalFailureError(CmcTraceError):
    """An underlying dense linear-algebra routine failed."""
