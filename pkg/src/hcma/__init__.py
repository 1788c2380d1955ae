"""Finite-difference laboratory for the perturbed geodesic equation on flat complex tori.

Modules
-------
torus      grids, potentials and finite-difference complex Hessians
linalg     Cholesky, Hermitian spectra, Takagi factorization
convexity  (S, omega_0)-convexity calculus on matrix pairs
solver     Newton and continuation solver on the strip
verify     convexity-preservation checks on solver output
suites     randomized matrix-identity suites
cli        the ``hcma`` command
"""

import os as _os

# cap BLAS worker threads before numpy is imported
_threads = _os.environ.get("HCMA_THREADS")
if _threads:
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        _os.environ.setdefault(_var, _threads)

from .errors import (  # noqa: E402
    BoundaryNotConvex,
    ConfigError,
    ContinuityStalled,
    EllipticityLost,
    HcmaError,
    NewtonDiverged,
    NotHermitian,
    NotPositiveDefinite,
    NotSymmetric,
)

__version__ = "0.1.0"

__all__ = [
    "BoundaryNotConvex",
    "ConfigError",
    "ContinuityStalled",
    "EllipticityLost",
    "HcmaError",
    "NewtonDiverged",
    "NotHermitian",
    "NotPositiveDefinite",
    "NotSymmetric",
]
