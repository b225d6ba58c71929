"""Vertex-sparsifier chains and sparse block-Cholesky factorizations for SDDM and Laplacian systems."""

from .sddm import (IndexPartition, InvalidMatrixError, LoewnerReport, SddmMatrix, ValidationResult,
                   XlDecomposition, exact_schur, loewner_approx_check, matvec, validate_sddm, xl_decompose)

__version__ = "0.1.0"

__all__ = [
    "IndexPartition", "InvalidMatrixError", "LoewnerReport", "SddmMatrix", "ValidationResult",
    "XlDecomposition", "exact_schur", "loewner_approx_check", "matvec", "validate_sddm", "xl_decompose",
]
