"""Conditional expectations from sampled pairs via kernel-compactified inverse problems.

Fit ``P K a = P G_delta y`` by regularized least squares and evaluate
``x -> sum_m a_m k(x, c_m)`` anywhere.
"""

from .estimator import (
    FitReport,
    ModelFormatError,
    RkhsModel,
    UnsupportedVersionError,
    evaluate,
    fit,
    fit_conditional_variance,
    load_model,
    save_model,
)
from .kernels import (
    DegreeData,
    EmpiricalMeasure,
    KernelError,
    KernelSpec,
    OperatorMatrix,
    UnderflowError,
    convolve,
    diffusion_kernel,
    gaussian_kernel,
    kernel_matrix,
    markov_normalize,
    rkhs_inner,
    symmetrize_diffusion,
)
from .operators import Dataset, InverseProblem, assemble_problem, build_markov, build_smoother, smoothed_truth
from .solver import IllPosedError, SolverConfig, SvdFactors, apply_BA, solve_regularized, svd

__version__ = "0.1.0"
