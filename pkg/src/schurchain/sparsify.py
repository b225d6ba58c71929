"""Spectral sparsification of the Laplacian part by effective-resistance sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

from .rng import make_rng
from .sddm import SddmMatrix, canonical_csr, edges_of, laplacian_from_edges, xl_decompose

DENSE_RESISTANCE_MAX = 2000
EXACT_BELOW = 64


@dataclass(frozen=True)
class SparsifyParams:
    eps: float = 0.5
    c: float = 8.0
    seed: int = 0
    exact_below: int = EXACT_BELOW
    # skip both small-input shortcuts; used to exercise sampling on tiny graphs
    always_sample: bool = False

    def __post_init__(self):
        if not 0 < self.eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        if self.c < 4:
            raise ValueError("sampling constant c must be at least 4")

    def samples(self, n: int) -> int:
        return math.ceil(self.c * n * math.log(max(n, 2)) / self.eps ** 2)

    @property
    def target_nnz_per_vertex(self) -> float:
        return self.c / self.eps ** 2


def _components(lap: sp.csr_matrix):
    return csgraph.connected_components(lap, directed=False)


def _dense_pinv_resistances(lap, u, v) -> np.ndarray:
    n = lap.shape[0]
    ncomp, labels = _components(lap)
    out = np.empty(u.size)
    dense = lap.toarray()
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        sel = np.flatnonzero(labels[u] == comp)
        if sel.size == 0:
            continue
        k = idx.size
        pos = np.full(n, -1)
        pos[idx] = np.arange(k)
        block = dense[np.ix_(idx, idx)]
        pinv = np.linalg.inv(block + 1.0 / k) - 1.0 / k
        a, b = pos[u[sel]], pos[v[sel]]
        out[sel] = pinv[a, a] + pinv[b, b] - 2 * pinv[a, b]
    return out


def _projected_resistances(lap, u, v, w, seed: int) -> np.ndarray:
    """Random-projection estimate using sparse LU solves on each grounded component."""
    n = lap.shape[0]
    ncomp, labels = _components(lap)
    k = max(24, math.ceil(16 * math.log(n)))
    rng = make_rng(seed, 0x5E5)
    signs = rng.choice([-1.0, 1.0], size=(k, u.size)) / math.sqrt(k)
    # rows of Q W^{1/2} B, as a k x n dense block
    rhs = np.zeros((n, k))
    sw = np.sqrt(w)
    np.add.at(rhs, u, (signs * sw).T)
    np.add.at(rhs, v, -(signs * sw).T)
    sol = np.zeros((n, k))
    for comp in range(ncomp):
        idx = np.flatnonzero(labels == comp)
        if idx.size < 2:
            continue
        rest = idx[1:]
        block = sp.csc_matrix(lap[rest][:, rest])
        lu = splu(block)
        sol[rest] = lu.solve(rhs[rest])
    diff = sol[u] - sol[v]
    return np.einsum("ij,ij->i", diff, diff)


def effective_resistances(m, edges=None, *, seed: int = 0) -> np.ndarray:
    """R_eff across the given (u, v) pairs of the Laplacian part of m (default: its own edges)."""
    lap = xl_decompose(canonical_csr(m)).laplacian.mat
    if edges is None:
        u, v, _ = edges_of(lap)
    else:
        u, v = (np.asarray(a, dtype=np.int64) for a in edges)
    _, labels = _components(lap)
    if np.any(labels[u] != labels[v]):
        raise ValueError("pair spans two components: resistance is infinite")
    if lap.shape[0] <= DENSE_RESISTANCE_MAX:
        return _dense_pinv_resistances(lap, u, v)
    eu, ev, ew = edges_of(lap)
    if edges is not None:
        raise ValueError("arbitrary pairs are only supported up to the dense size limit")
    return _projected_resistances(lap, eu, ev, ew, seed)


def sparsify(m, params: SparsifyParams = SparsifyParams()) -> SddmMatrix:
    """Sample the Laplacian part by w_e R_e, keep the diagonal excess verbatim."""
    sm = m if isinstance(m, SddmMatrix) else SddmMatrix(m, check=False)
    n = sm.n
    u, v, w = edges_of(sm.mat)
    q = params.samples(n)
    if not params.always_sample and (n <= params.exact_below or u.size <= q):
        return sm
    xl = xl_decompose(sm)
    r = effective_resistances(sm, seed=params.seed)
    lev = np.maximum(w * r, 0.0)
    prob = lev / lev.sum()
    rng = make_rng(params.seed, n, u.size)
    picks = rng.choice(u.size, size=q, replace=True, p=prob)
    counts = np.bincount(picks, minlength=u.size)
    keep = counts > 0
    new_w = counts[keep] * w[keep] / (q * prob[keep])
    lap = laplacian_from_edges(n, u[keep], v[keep], new_w)
    return SddmMatrix.from_xl(xl.x, lap)
