"""Continuation solver for discrete constant-mean-curvature surfaces.

Traces one-parameter families of CMC surfaces with fixed boundary by
writing each new surface as a normal graph over the previous one and
following the solution branch in enclosed volume with pseudo-arclength
continuation.  Chebyshev/Fourier pseudospectral collocation supplies the
discrete operators; a twisted Dirichlet eigenvalue solve reports physical
stability and flags symmetry-breaking bifurcations along the way.

Submodules are imported lazily so that the command-line entry point can
configure BLAS threading before any heavy import happens.
"""

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "spectral",
    "geometry",
    "system",
    "continuation",
    "problems",
    "io",
    "report",
    "cli",
    "errors",
)


def __getattr__(name):
    if name in _SUBMODULES:
        return importlib.import_module(f"{__name__}.{name}")
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(list(globals()) + list(_SUBMODULES))
