"""Finding k x k submatrices with a high average in n x n Gaussian matrices.

LAS search, exact local/global optimality scans, limit-law constants and
samplers, and Monte Carlo experiments checking the limit statements.
"""
from .kernels import BACKEND
from .matrix import (
    AnovaDecomposition,
    GaussianMatrix,
    InvalidDimensionError,
    SubmatrixIndex,
    anova_decompose,
    cross_sums,
    sample_gaussian_matrix,
    submatrix_average,
    top_k_indices,
)
from .search import (
    BudgetError,
    LasResult,
    LocalizationResult,
    LocalOptimaCensus,
    count_local_optima_above,
    enumerate_local_optima,
    global_optimum_exhaustive,
    largest_threshold_submatrix_size,
    las_search,
    local_optimality_status,
)

__version__ = "0.1.0"
