"""carnotlab: a numerical laboratory for heat semigroups on Carnot groups.

Builds stratified Lie groups in exponential coordinates, evaluates closed
form heat kernels where they exist, samples the hypoelliptic diffusion,
estimates the sharp reverse Poincare constant Lambda from the spectral
matrix M, and certifies the downstream functional inequalities.
"""

from ._fastpath import BACKEND, available_backends
from .errors import (CarnotLabError, DimensionMismatch, DimensionTooLarge,
                     ExcessiveRejection, MinimizationFailed,
                     NumericalUnderflow, QuadratureNotConverged,
                     SchemeUnsupported, SpecFileError, UnsupportedGroup,
                     UnsupportedStep)
from .groups import (GroupSpec, abelian, dilate, engel, generic_htype_21,
                     heisenberg, htype_group, inverse, load_spec_file,
                     preset, product, resolve_group)
from .poly import Polynomial, VectorField
from .calculus import (carre_du_champ, heat_apply, horizontal_frame,
                       left_translate, polynomial_corpus, sample_points,
                       sublaplacian)
from .heat import KernelEvaluator
from .mc import MCConfig, SampleBatch, bias_diagnostic, estimate_Ptf, sample_endpoint
from .spectral import (GridConfig, SpectralReport, bound_check, compute_M_mc,
                       compute_M_quadrature, lambda_of, sharpness_probe,
                       trace_identity_check)
from .inequalities import (BoxSet, Bump, ClampedCoordinate,
                           InequalityCertificate,
                           default_lambda, gradient_bound_check,
                           horizontal_perimeter, isoperimetric_check,
                           pseudo_poincare_check, reverse_poincare_exact,
                           reverse_poincare_mc)

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "available_backends", "__version__",
    "CarnotLabError", "DimensionMismatch", "DimensionTooLarge",
    "ExcessiveRejection", "MinimizationFailed", "NumericalUnderflow",
    "QuadratureNotConverged", "SchemeUnsupported", "SpecFileError",
    "UnsupportedGroup", "UnsupportedStep",
    "GroupSpec", "abelian", "dilate", "engel", "generic_htype_21",
    "heisenberg", "htype_group", "inverse", "load_spec_file", "preset",
    "product", "resolve_group",
    "Polynomial", "VectorField",
    "carre_du_champ", "heat_apply", "horizontal_frame", "left_translate",
    "polynomial_corpus", "sample_points", "sublaplacian",
    "KernelEvaluator",
    "MCConfig", "SampleBatch", "bias_diagnostic", "estimate_Ptf",
    "sample_endpoint",
    "GridConfig", "SpectralReport", "bound_check", "compute_M_mc",
    "compute_M_quadrature", "lambda_of", "sharpness_probe",
    "trace_identity_check",
    "BoxSet", "Bump", "ClampedCoordinate", "InequalityCertificate", "default_lambda",
    "gradient_bound_check", "horizontal_perimeter", "isoperimetric_check",
    "pseudo_poincare_check", "reverse_poincare_exact", "reverse_poincare_mc",
]
