"""Principal differences analysis: divergence-maximizing projections.

Finds directions along which two sample populations differ most in squared
Wasserstein distance, by a semidefinite relaxation followed by projected
gradient tightening, with permutation tests and cross-validated sparsity.
"""

from .inference import (AnalysisResult, CVResult, PermutationReport, PipelineConfig,
                        cross_validate_lambda, pda_analyze, permutation_test)
from .relax import RelaxConfig, SolverError, relax_solve
from .tighten import TightenConfig, tighten
from .wasserstein import gradient, objective, wasserstein1d

__version__ = "0.1.0"

__all__ = [
    "AnalysisResult", "CVResult", "PermutationReport", "PipelineConfig",
    "RelaxConfig", "SolverError", "TightenConfig", "cross_validate_lambda",
    "gradient", "objective", "pda_analyze", "permutation_test", "relax_solve",
    "tighten", "wasserstein1d", "__version__",
]
