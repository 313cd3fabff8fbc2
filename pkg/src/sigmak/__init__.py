"""Prescribed sigma_k curvature of the Einstein tensor, numerically.

Symmetric-function and cone algebra, conformal curvature calculus in both
standard conventions, closed-form exact solutions used as oracles, discrete
model geometries, and a homotopy-continuation solver for the deformed
curvature equation on model 3-geometries.
"""

from .symfun import (
    ConeReport,
    Spectrum,
    cone_membership,
    maclaurin_ratio,
    newton_transform,
    sample_cone,
    sigma_k,
    sigma_k_gradient,
    sigma_k_matrix,
    sigma_truncated,
)
from .tensor import (
    MetricTensor,
    SymTensor,
    eigen_match_distance,
    gen_eigen,
    sym_eigen,
)

__version__ = "0.1.0"

__all__ = [
    "ConeReport",
    "Spectrum",
    "MetricTensor",
    "SymTensor",
    "cone_membership",
    "eigen_match_distance",
    "gen_eigen",
    "maclaurin_ratio",
    "newton_transform",
    "sample_cone",
    "sigma_k",
    "sigma_k_gradient",
    "sigma_k_matrix",
    "sigma_truncated",
    "sym_eigen",
    "__version__",
]
