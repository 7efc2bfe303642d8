"""Numerical toolkit for selfadjoint matrix Schrodinger operators on the half-line.

Bound states via the Jost matrix, Gel'fand-Levitan normalization, Darboux
bound-state removal and addition, a finite-difference spectral oracle, and
desk-scale verification of the sharp reverse Lieb-Thirring inequality.
"""

from .errors import (BoundaryConditionError, DimensionMismatchError,
                     HalflineSpectralError, InconsistentRankError,
                     NotPositiveDefiniteError, PreconditionError,
                     PropagationError, TransformationInstabilityError)
from .matcore import (Projection, kernel_projection, moore_penrose,
                      positive_sqrt, symmetrize)
from .model import (BoundaryPair, DiagonalBoundary, PotentialGrid,
                    normalize_to_robin, split_pos_neg, truncate_negative,
                    truncate_support, validate_boundary)
from .propagate import MatrixSolution, jost_solution, regular_solution
from .spectral import (BoundState, SpectrumReport, analyze_spectrum,
                       find_bound_states, gl_normalization, jost_matrix)
from .darboux import (AdditionResult, RemovalResult, add_bound_state,
                      bracket_limit_check, perturbed_regular_solution,
                      remove_bound_state, verify_addition_roundtrip,
                      verify_removal, w_matrix)
from .fdoracle import oracle_negative_spectrum
from .ltcheck import (LTReport, dirichlet_no_bound_state_check, lt_evaluate,
                      positivity_ledger, sharpness_sweep)
from .presets import PRESETS, load_preset

__version__ = "0.1.0"

__all__ = [
    "BoundaryConditionError", "DimensionMismatchError", "HalflineSpectralError",
    "InconsistentRankError", "NotPositiveDefiniteError", "PreconditionError",
    "PropagationError", "TransformationInstabilityError",
    "Projection", "kernel_projection", "moore_penrose", "positive_sqrt", "symmetrize",
    "BoundaryPair", "DiagonalBoundary", "PotentialGrid", "normalize_to_robin",
    "split_pos_neg", "truncate_negative", "truncate_support", "validate_boundary",
    "MatrixSolution", "jost_solution", "regular_solution",
    "BoundState", "SpectrumReport", "analyze_spectrum", "find_bound_states",
    "gl_normalization", "jost_matrix",
    "AdditionResult", "RemovalResult", "add_bound_state", "bracket_limit_check",
    "perturbed_regular_solution", "remove_bound_state", "verify_addition_roundtrip",
    "verify_removal", "w_matrix",
    "oracle_negative_spectrum",
    "LTReport", "dirichlet_no_bound_state_check", "lt_evaluate",
    "positivity_ledger", "sharpness_sweep",
    "PRESETS", "load_preset",
    "__version__",
]
