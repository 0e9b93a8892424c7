"""Sparse tapered covariance assembly and Cholesky factorization."""

from .cholesky import (
    CholeskyFactor,
    NotPositiveDefinite,
    SymbolicAnalysis,
    analyze,
    factorize,
    half_solve,
    solve,
)
from .matrix import (
    DEFAULT_NNZ_CAP,
    DenseLayout,
    SparsePattern,
    SparseSymMatrix,
    TaperedLayout,
    assemble_dense,
    assemble_tapered,
    export_matrix_market,
    spectral_bound,
)

__all__ = [
    "CholeskyFactor",
    "DEFAULT_NNZ_CAP",
    "DenseLayout",
    "NotPositiveDefinite",
    "SparsePattern",
    "SparseSymMatrix",
    "SymbolicAnalysis",
    "TaperedLayout",
    "analyze",
    "assemble_dense",
    "assemble_tapered",
    "export_matrix_market",
    "factorize",
    "half_solve",
    "solve",
    "spectral_bound",
]
