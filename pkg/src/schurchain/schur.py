"""Approximate Schur complements by repeated splitting and squaring of the eliminated block.

Blocks are handled in F/C coordinates internally; public functions take a
matrix plus a partition and return matrices in the caller's indexing.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from . import expanders as ex
from .rng import derive_seed
from .sddm import (SddmMatrix, as_partition, blocks, canonical_csr, clean_offdiagonal,
                   strong_dominance)


@dataclass(frozen=True)
class SchurSplit:
    m1: sp.csr_matrix
    m2: SddmMatrix


@dataclass(frozen=True)
class ApproxSchurParams:
    alpha: float
    eps: float
    seed: int = 0

    @property
    def d(self) -> int:
        return max(1, math.ceil(math.log(13.0 / self.eps) / math.log(1.0 + self.alpha) - 1e-12))

    @property
    def per_step_eps(self) -> float:
        return self.eps / (3 * self.d)


def _ones(k: int) -> np.ndarray:
    return np.ones(k)


def _offdiag(mat: sp.csr_matrix) -> sp.csr_matrix:
    out = (mat - sp.diags(mat.diagonal(), format="csr")).tocsr()
    out.eliminate_zeros()
    return out


def _from_blocks(ff, fc, cc, part) -> sp.csr_matrix:
    """Symmetric matrix in original indexing from F/C blocks."""
    full = sp.bmat([[ff, fc], [fc.T, cc]], format="csr")
    perm = np.concatenate([part.f, part.c])
    inv = np.empty_like(perm)
    inv[perm] = np.arange(perm.size)
    out = full[inv][:, inv].tocsr()
    out.sort_indices()
    return out


def _with_rowsums(off: sp.csr_matrix, rowsums: np.ndarray) -> sp.csr_matrix:
    """Nonpositive off-diagonal part plus the diagonal that produces the given row sums."""
    deg = -np.asarray(off.sum(axis=1)).ravel()
    out = (off + sp.diags(rowsums + deg, format="csr")).tocsr()
    out.sort_indices()
    return out


def _dominant_parts(m_ff: sp.csr_matrix):
    dvec = m_ff.diagonal().astype(float)
    if np.any(dvec <= 0):
        raise ValueError("F block has a nonpositive diagonal entry")
    adj = (-_offdiag(m_ff)).tocsr()
    return dvec, adj


def _needs_expander(sizes: np.ndarray, eps: float, prefer_exact: bool) -> np.ndarray:
    sizes = np.asarray(sizes, dtype=float)
    n_hat = np.floor(2 * sizes / eps ** 2) + 1
    small = (n_hat < ex.SMALL_EXPANDER) | (sizes <= 1)
    cheap = prefer_exact & (sizes * (sizes - 1) / 2 <= ex.expander_edge_estimate(np.maximum(sizes, 1), eps))
    return ~(small | cheap)


def _needs_bipartite_expander(na: np.ndarray, nb: np.ndarray, eps: float, prefer_exact: bool) -> np.ndarray:
    side = np.maximum(na, nb).astype(float)
    n_hat = np.floor(2 * side / eps ** 2) + 1
    small = (na * nb <= 1) | (n_hat < ex.SMALL_EXPANDER)
    cheap = prefer_exact & (na * nb <= ex.expander_edge_estimate(np.maximum(side, 1), eps))
    return ~(small | cheap)


def _edges_to_offdiag(k: int, us, vs, ws) -> sp.csr_matrix:
    if not us:
        return sp.csr_matrix((k, k))
    u = np.concatenate(us)
    v = np.concatenate(vs)
    w = np.concatenate(ws)
    keep = u != v
    u, v, w = u[keep], v[keep], w[keep]
    out = sp.csr_matrix((np.concatenate([-w, -w]), (np.concatenate([u, v]), np.concatenate([v, u]))), shape=(k, k))
    out.sum_duplicates()
    return out


def _row_slices(mat: sp.csr_matrix, r: int):
    lo, hi = mat.indptr[r], mat.indptr[r + 1]
    return mat.indices[lo:hi], mat.data[lo:hi]


# ---------------------------------------------------------------- Schur of a diagonal F block


def _schur_diag_blocks(dvec, m_fc, m_cc, eps, seed, prefer_exact=True) -> sp.csr_matrix:
    """Schur complement of [[diag(d), M_FC], [M_CF, M_CC]] with per-vertex cliques sparsified."""
    k = m_cc.shape[0]
    w_fc = (-m_fc).tocsr()
    sizes = np.diff(w_fc.indptr)
    expand = _needs_expander(sizes, eps, prefer_exact)
    keep = sp.diags((~expand).astype(float) / dvec, format="csr")
    exact_part = (w_fc.T @ keep @ w_fc).tocsr()
    result = (m_cc - exact_part).tocsr()
    if expand.any():
        drop = sp.diags(expand.astype(float) / dvec, format="csr")
        s_x = w_fc.T @ (drop @ (w_fc @ _ones(k)))
        us, vs, ws = [], [], []
        for u in np.flatnonzero(expand):
            cols, vals = _row_slices(w_fc, u)
            g = ex.weighted_expander(vals / math.sqrt(dvec[u]), eps, seed=derive_seed(seed, int(u)),
                                     prefer_exact=prefer_exact)
            us.append(cols[g.u])
            vs.append(cols[g.v])
            ws.append(g.w)
        lap_edges = _edges_to_offdiag(k, us, vs, ws)
        lap_diag = -np.asarray(lap_edges.sum(axis=1)).ravel()
        result = (result + lap_edges + sp.diags(lap_diag - s_x, format="csr")).tocsr()
    return clean_offdiagonal(result)


def approx_schur_diag(m, part, eps: float, seed: int = 0, prefer_exact: bool = True) -> SddmMatrix:
    """Approximate Schur complement when M_FF is diagonal, one product-demand clique per eliminated vertex."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0])
    m_ff, m_fc, _, m_cc = blocks(mat, p)
    if _offdiag(m_ff).nnz:
        raise ValueError("F block must be diagonal")
    out = _schur_diag_blocks(m_ff.diagonal(), m_fc, m_cc, eps, seed, prefer_exact)
    return SddmMatrix(out, check=False)


# ---------------------------------------------------------------- splitting


def split_once(m, part) -> SchurSplit:
    """M1, M2 with Schur(M, F) = (Schur(M1, F) + Schur(M2, F)) / 2."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0], allow_empty=False)
    m_ff, m_fc, _, m_cc = blocks(mat, p)
    dvec, adj = _dominant_parts(m_ff)
    inv_d = sp.diags(1.0 / dvec, format="csr")
    s = np.asarray(m_fc.T @ (inv_d @ (m_fc @ _ones(p.c.size)))).ravel()
    m1 = _from_blocks(sp.diags(dvec, format="csr"), m_fc, sp.diags(s, format="csr"), p)
    ff2 = sp.diags(dvec, format="csr") - adj @ inv_d @ adj
    fc2 = m_fc + adj @ inv_d @ m_fc
    cc2 = 2 * m_cc - sp.diags(s, format="csr")
    m2 = _from_blocks(ff2, fc2, cc2, p)
    return SchurSplit(m1, SddmMatrix(m2, check=False))


def _square_blocks(dvec, adj, m_fc, m_cc, eps, seed, prefer_exact=True):
    """Blocks (FF, FC, CC) of the second split half with its two-step products sparsified."""
    nf, nc = m_fc.shape
    inv_d = 1.0 / dvec
    w_fc = (-m_fc).tocsr()
    fc_sum = w_fc @ _ones(nc)
    a_sum = adj @ _ones(nf)
    s = w_fc.T @ (inv_d * fc_sum)
    r_f = dvec - fc_sum - adj @ (inv_d * (a_sum + fc_sum))
    r_c = -(w_fc.T @ _ones(nf)) - w_fc.T @ (inv_d * a_sum) + 2 * (m_cc @ _ones(nc)) - s

    a_cnt = np.diff(adj.indptr)
    b_cnt = np.diff(w_fc.indptr)
    expand = _needs_expander(a_cnt, eps, prefer_exact) | _needs_bipartite_expander(a_cnt, b_cnt, eps, prefer_exact)
    keep = sp.diags((~expand).astype(float) * inv_d, format="csr")
    ff_off = _offdiag((adj @ keep @ adj).tocsr())
    fc_extra = (adj @ keep @ w_fc).tocsr()
    ff_off = -ff_off
    fc_off = (m_fc - fc_extra).tocsr()
    if expand.any():
        n = nf + nc
        us, vs, ws = [], [], []
        for u in np.flatnonzero(expand):
            fcols, fvals = _row_slices(adj, u)
            ccols, cvals = _row_slices(w_fc, u)
            if fcols.size == 0:
                continue
            root = math.sqrt(dvec[u])
            useed = derive_seed(seed, int(u))
            if fcols.size > 1:
                g = ex.weighted_expander(fvals / root, eps, seed=useed, prefer_exact=prefer_exact)
                us.append(fcols[g.u])
                vs.append(fcols[g.v])
                ws.append(g.w)
            if ccols.size:
                g = ex.weighted_bipartite_expander(fvals / root, cvals / root, eps, seed=useed,
                                                   prefer_exact=prefer_exact)
                ids = np.concatenate([fcols, nf + ccols])
                us.append(ids[g.u])
                vs.append(ids[g.v])
                ws.append(g.w)
        extra = _edges_to_offdiag(n, us, vs, ws)
        ff_off = (ff_off + extra[:nf, :nf]).tocsr()
        fc_off = (fc_off + extra[:nf, nf:]).tocsr()
    cc_off = 2 * _offdiag(m_cc)
    off = sp.bmat([[ff_off, fc_off], [fc_off.T, cc_off]], format="csr")
    full = _with_rowsums(off, np.concatenate([r_f, r_c]))
    return full[:nf, :nf].tocsr(), full[:nf, nf:].tocsr(), full[nf:, nf:].tocsr()


def square_sparsify(m, part, eps: float, seed: int = 0, prefer_exact: bool = True) -> SddmMatrix:
    """Sparse approximation of the second split half M2."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0], allow_empty=False)
    m_ff, m_fc, _, m_cc = blocks(mat, p)
    dvec, adj = _dominant_parts(m_ff)
    ff, fc, cc = _square_blocks(dvec, adj, m_fc, m_cc, eps, seed, prefer_exact)
    return SddmMatrix(_from_blocks(ff, fc, cc, p), check=False)


# ---------------------------------------------------------------- last step


def _last_step_blocks(m_ff, m_fc, m_cc, eps, seed, prefer_exact=True) -> sp.csr_matrix:
    nf, nc = m_fc.shape
    dvec, adj = _dominant_parts(m_ff)
    y = adj @ _ones(nf)
    x = dvec - y
    if np.any(x <= 0):
        raise ValueError("F block has a row without positive excess")
    inv_x = 1.0 / x
    w_fc = (-m_fc).tocsr()
    fc_sum = w_fc @ _ones(nc)
    s = w_fc.T @ (inv_x * fc_sum)

    half1 = _schur_diag_blocks(x, m_fc, sp.diags(s, format="csr"), eps / 2, derive_seed(seed, 1), prefer_exact)

    # second half: F block diag(X); F-C edges are rescaled direct edges plus 2-paths through F
    direct = sp.diags(1.0 - y * inv_x, format="csr") @ m_fc
    mid_sizes = np.diff(adj.indptr)
    c_sizes = np.diff(w_fc.indptr)
    expand = _needs_bipartite_expander(mid_sizes, c_sizes, eps / 2, prefer_exact)
    keep = sp.diags((~expand).astype(float) * inv_x, format="csr")
    fc_off = (direct - adj @ keep @ w_fc).tocsr()
    if expand.any():
        us, vs, ws = [], [], []
        for v in np.flatnonzero(expand):
            fcols, fvals = _row_slices(adj, v)
            ccols, cvals = _row_slices(w_fc, v)
            root = math.sqrt(x[v])
            g = ex.weighted_bipartite_expander(fvals / root, cvals / root, eps / 2,
                                               seed=derive_seed(seed, 2, int(v)), prefer_exact=prefer_exact)
            ids = np.concatenate([fcols, nf + ccols])
            us.append(ids[g.u])
            vs.append(ids[g.v])
            ws.append(g.w)
        extra = _edges_to_offdiag(nf + nc, us, vs, ws)
        fc_off = (fc_off + extra[:nf, nf:]).tocsr()
    r_f = x - fc_sum + y * inv_x * fc_sum - adj @ (inv_x * fc_sum)
    r_c = -(w_fc.T @ _ones(nf)) + 2 * (m_cc @ _ones(nc)) - s
    off = sp.bmat([[None, fc_off], [fc_off.T, 2 * _offdiag(m_cc)]], format="csr")
    off.resize((nf + nc, nf + nc))
    full = _with_rowsums(off, np.concatenate([r_f, r_c]))
    ff2 = full[:nf, :nf].diagonal()
    half2 = _schur_diag_blocks(ff2, full[:nf, nf:].tocsr(), full[nf:, nf:].tocsr(), eps / 2,
                               derive_seed(seed, 3), prefer_exact)
    return clean_offdiagonal(0.5 * (half1 + half2))


def last_step(m, part, eps: float, seed: int = 0, prefer_exact: bool = True) -> SddmMatrix:
    """Schur approximation for a very dominant F block via the two-term operator."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0], allow_empty=False)
    m_ff, m_fc, _, m_cc = blocks(mat, p)
    if strong_dominance(m_ff) < 4 * (1 - 1e-9):
        raise ValueError("F block must be 4-strongly diagonally dominant")
    return SddmMatrix(_last_step_blocks(m_ff, m_fc, m_cc, eps, seed, prefer_exact), check=False)


# ---------------------------------------------------------------- driver


def approx_schur(m, part, alpha: float = 4.0, eps: float = 0.5, seed: int = 0, prefer_exact: bool = True,
                 info: dict | None = None) -> SddmMatrix:
    """Sparse approximation of Schur(M, F) for an alpha-strongly dominant F block, alpha >= 4."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0])
    if p.f.size == 0:
        return m if isinstance(m, SddmMatrix) else SddmMatrix(mat, check=False)
    if p.c.size == 0:
        raise ValueError("cannot eliminate every index")
    if alpha < 4:
        raise ValueError("alpha must be at least 4")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    params = ApproxSchurParams(alpha, eps, seed)
    m_ff, m_fc, _, m_cc = blocks(mat, p)
    measured = strong_dominance(m_ff)
    if measured < alpha * (1 - 1e-9):
        raise ValueError(f"F block is only {measured:.4g}-strongly dominant, need {alpha}")
    trace = [measured]
    nf, nc = m_fc.shape
    acc = sp.csr_matrix((nc, nc))
    step = params.per_step_eps
    for it in range(params.d):
        dvec, adj = _dominant_parts(m_ff)
        inv_d = 1.0 / dvec
        s = (-m_fc).T @ (inv_d * ((-m_fc) @ _ones(nc)))
        half1 = _schur_diag_blocks(dvec, m_fc, sp.diags(s, format="csr"), step,
                                   derive_seed(seed, it, 1), prefer_exact)
        acc = (acc + 0.5 * half1).tocsr()
        acc.sum_duplicates()
        ff, fc, cc = _square_blocks(dvec, adj, m_fc, m_cc, step, derive_seed(seed, it, 2), prefer_exact)
        m_ff, m_fc, m_cc = 0.5 * ff, 0.5 * fc, 0.5 * cc
        trace.append(strong_dominance(m_ff))
    acc = acc + _last_step_blocks(m_ff, m_fc, m_cc, eps / 12, derive_seed(seed, params.d, 3), prefer_exact)
    if info is not None:
        info["iterations"] = params.d
        info["per_step_eps"] = step
        info["dominance_trace"] = trace
    return SddmMatrix(clean_offdiagonal(acc), check=False)


def regularize_for_schur(m, eps: float, kappa: float) -> SddmMatrix:
    """Add eps * trace(M) / (n kappa) to every diagonal entry."""
    mat = canonical_csr(m)
    if eps == 0:
        return m if isinstance(m, SddmMatrix) else SddmMatrix(mat, check=False)
    n = mat.shape[0]
    shift = eps * mat.diagonal().sum() / (n * kappa)
    return SddmMatrix(mat + shift * sp.identity(n, format="csr"), check=False)
