"""Prescribed sigma_2 curvature on the round 4-sphere: spectral calculus,
Moebius normalization, the degree of the mass-center map G, and a
continuation solver for conformal metrics with sigma_2(A_g) = K."""

from .errors import (
    BoundaryTooSmallError,
    ConfigError,
    ConvergenceError,
    InadmissibleError,
    NearBlowUpError,
    NonDegeneracyError,
    NonPositiveKError,
    ObstructionError,
    Sigma2Error,
    SingularLinearizationError,
)
from .fields import ScalarField
from .grid import SPHERE_VOLUME, SphereGrid, build_grid
from .kspec import KSpec, preset

__version__ = "0.1.0"

__all__ = [
    "BoundaryTooSmallError",
    "ConfigError",
    "ConvergenceError",
    "InadmissibleError",
    "KSpec",
    "NearBlowUpError",
    "NonDegeneracyError",
    "NonPositiveKError",
    "ObstructionError",
    "SPHERE_VOLUME",
    "ScalarField",
    "Sigma2Error",
    "SingularLinearizationError",
    "SphereGrid",
    "build_grid",
    "preset",
]
