"""Certified numerics for quantitative stability of the Riesz rearrangement
inequality with a ball kernel: overlap geometry, spherical spectral analysis
of the interaction Hessian, constructive competitor/centering maps, and the
constant-tracking pipeline that assembles an explicit stability constant.
"""

__version__ = "0.1.0"

from .errors import ConsistencyError, ConvergenceError, ParameterError
from .geometry import (
    BallPair,
    PhiBoundCertificate,
    ball_volume,
    certify_phi_bounds,
    gamma_constant,
    phi,
    phi_derivative,
    unit_sphere_area,
)
from .grids import DirectionSet, RadialGrid, SphericalGrid, default_grid, direction_set

__all__ = [
    "__version__",
    "ParameterError",
    "ConsistencyError",
    "ConvergenceError",
    "BallPair",
    "PhiBoundCertificate",
    "unit_sphere_area",
    "ball_volume",
    "phi",
    "phi_derivative",
    "gamma_constant",
    "certify_phi_bounds",
    "DirectionSet",
    "RadialGrid",
    "SphericalGrid",
    "direction_set",
    "default_grid",
]
