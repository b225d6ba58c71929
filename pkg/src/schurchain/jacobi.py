"""Truncated power-series inverses of a strongly dominant block."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .sddm import blocks, canonical_csr, strong_dominance, xl_decompose


class NnzBudgetExceeded(RuntimeError):
    def __init__(self, message: str, row: int | None = None):
        super().__init__(message)
        self.row = row


def jacobi_order(alpha: float, eps: float) -> int:
    """Smallest odd k >= log_{alpha/2}(2/eps), at least 1."""
    if alpha <= 2:
        raise ValueError("alpha must exceed 2")
    val = math.log(2.0 / eps) / math.log(alpha / 2.0)
    k = max(1, math.ceil(val - 1e-12))
    return k if k % 2 == 1 else k + 1


@dataclass(frozen=True)
class JacobiOperator:
    x_ff: np.ndarray
    l_ff: sp.csr_matrix
    k: int

    @property
    def size(self) -> int:
        return self.x_ff.shape[0]

    def work(self) -> int:
        """Multiply-adds of one application to a single vector."""
        f = self.size
        return self.k * (self.l_ff.nnz + 2 * f) + f


@dataclass(frozen=True)
class LastStepOperator:
    x_ff: np.ndarray
    l_ff: sp.csr_matrix


def _split_block(m_ff) -> tuple:
    xl = xl_decompose(canonical_csr(m_ff))
    x = np.array(xl.x, dtype=float)
    if np.any(x <= 0):
        raise ValueError("block has a row without positive excess")
    return x, xl.laplacian.mat


def build_jacobi(m, f, alpha: float, eps: float, *, check: bool = True) -> JacobiOperator:
    if alpha < 4:
        raise ValueError("alpha must be at least 4")
    if not 0 < eps <= 0.5:
        raise ValueError("eps must lie in (0, 1/2]")
    m_ff = blocks(m, f)[0]
    if check and strong_dominance(m_ff) < alpha * (1 - 1e-9):
        raise ValueError("F block is not alpha-strongly diagonally dominant")
    x, lap = _split_block(m_ff)
    return JacobiOperator(x, lap, jacobi_order(alpha, eps))


def jacobi_from_block(m_ff, k: int) -> JacobiOperator:
    if k < 1 or k % 2 == 0:
        raise ValueError("k must be odd and positive")
    x, lap = _split_block(m_ff)
    return JacobiOperator(x, lap, k)


def _scale_rows(v, x):
    return v / x if v.ndim == 1 else v / x[:, None]


def apply_jacobi(z: JacobiOperator, b) -> np.ndarray:
    """Sum_{i<=k} X^{-1} (-L X^{-1})^i b, for a vector or a block of columns."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != z.size:
        raise ValueError("dimension mismatch")
    term = _scale_rows(b, z.x_ff)
    total = term.copy()
    for _ in range(z.k):
        term = -_scale_rows(z.l_ff @ term, z.x_ff)
        total += term
    return total


def materialize_jacobi(z: JacobiOperator, nnz_budget: int | None = None) -> sp.csr_matrix:
    inv_x = sp.diags(1.0 / z.x_ff, format="csr")
    step = (-(inv_x @ z.l_ff)).tocsr()
    term = inv_x
    total = inv_x.copy()
    for _ in range(z.k):
        term = (step @ term).tocsr()
        total = (total + term).tocsr()
        if nnz_budget is not None and total.nnz > nnz_budget:
            row = int(np.argmax(np.diff(total.indptr)))
            raise NnzBudgetExceeded(f"materialized block has {total.nnz} nonzeros > budget {nnz_budget}", row)
    total.sort_indices()
    return total


def build_last_step_operator(m_ff) -> LastStepOperator:
    x, lap = _split_block(m_ff)
    return LastStepOperator(x, lap)


def apply_last_step(op: LastStepOperator, b) -> np.ndarray:
    """1/2 X^{-1} b + 1/2 X^{-1}(X-L)X^{-1}(X-L)X^{-1} b."""
    b = np.asarray(b, dtype=float)
    x = op.x_ff
    direct = _scale_rows(b, x)
    y = direct
    for _ in range(2):
        y = _scale_rows((y * x if y.ndim == 1 else y * x[:, None]) - op.l_ff @ y, x)
    return 0.5 * direct + 0.5 * y
