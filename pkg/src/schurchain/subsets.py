"""Random selection of strongly diagonally dominant elimination blocks."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .rng import make_rng
from .sddm import canonical_csr


class SubsetError(RuntimeError):
    pass


@dataclass(frozen=True)
class SubsetParams:
    alpha: float = 4.0
    seed: int = 0
    max_retries: int = 64

    def __post_init__(self):
        if self.alpha < 0:
            raise ValueError("alpha must be nonnegative")
        if self.max_retries < 1:
            raise ValueError("max_retries must be at least 1")


def _dominant_rows(mat, sample: np.ndarray, alpha: float) -> np.ndarray:
    block = mat[sample][:, sample].tocsr()
    diag = block.diagonal()
    off = np.asarray(abs(block).sum(axis=1)).ravel() - np.abs(diag)
    return sample[off <= diag / (1.0 + alpha)]


def _singleton(mat) -> np.ndarray:
    diag = mat.diagonal()
    off = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(off > 0, diag / np.where(off > 0, off, 1.0), np.inf)
    ratio[diag <= 0] = -np.inf
    best = int(np.argmax(ratio))
    if diag[best] <= 0:
        raise SubsetError("matrix too small: no eliminable index")
    return np.array([best], dtype=np.int64)


def sdd_subset(m, params: SubsetParams = SubsetParams(), *, rng=None, return_rounds: bool = False):
    """Sample F with M_FF alpha-strongly diagonally dominant and |F| >= n / (8 (1 + alpha))."""
    mat = canonical_csr(m)
    n = mat.shape[0]
    alpha = params.alpha
    if n < 8 * (1 + alpha):
        f = _singleton(mat)
        return (f, 0) if return_rounds else f
    rng = make_rng(params.seed) if rng is None else rng
    size = math.ceil(n / (4 * (1 + alpha)))
    need = n / (8 * (1 + alpha))
    for rounds in range(1, params.max_retries + 1):
        sample = np.sort(rng.choice(n, size=size, replace=False))
        f = _dominant_rows(mat, sample, alpha)
        if f.size >= need:
            return (f, rounds) if return_rounds else f
    raise SubsetError(f"no dominant subset after {params.max_retries} rounds")


def low_degree_subset(m, params: SubsetParams = SubsetParams(), *, rng=None, return_rounds: bool = False):
    """Like sdd_subset, restricted to rows with at most twice the average number of nonzeros."""
    mat = canonical_csr(m)
    n = mat.shape[0]
    row_nnz = np.diff(mat.indptr)
    keep = np.flatnonzero(row_nnz <= 2 * mat.nnz / n)
    if keep.size == n:
        return sdd_subset(mat, params, rng=rng, return_rounds=return_rounds)
    minor = mat[keep][:, keep].tocsr()
    f, rounds = sdd_subset(minor, params, rng=rng, return_rounds=True)
    f = keep[f]
    return (f, rounds) if return_rounds else f
