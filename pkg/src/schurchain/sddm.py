"""Sparse SDDM / Laplacian matrices, exact Schur complements and the Loewner oracle."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import splu

ZERO_TOL = 1e-12
LOEWNER_SLACK = 1e-9
DENSE_SCHUR_MAX_F = 64


class InvalidMatrixError(ValueError):
    pass


def canonical_csr(a) -> sp.csr_matrix:
    """Sorted CSR with duplicates summed and explicit zeros dropped."""
    if isinstance(a, SddmMatrix):
        return a.mat
    if sp.issparse(a):
        m = sp.csr_matrix(a, dtype=float, copy=True)
    else:
        m = sp.csr_matrix(np.asarray(a, dtype=float))
    m.sum_duplicates()
    m.sort_indices()
    m.eliminate_zeros()
    return m


def _freeze(m: sp.csr_matrix) -> sp.csr_matrix:
    for arr in (m.data, m.indices, m.indptr):
        arr.flags.writeable = False
    return m


@dataclass(frozen=True)
class ValidationResult:
    ok: bool
    kind: str | None = None
    error: str | None = None
    where: tuple = ()

    def __bool__(self) -> bool:
        return self.ok

    def raise_if_invalid(self) -> None:
        if not self.ok:
            raise InvalidMatrixError(self.error)


def _offdiag_coo(m: sp.csr_matrix):
    coo = m.tocoo()
    mask = coo.row != coo.col
    return coo.row[mask], coo.col[mask], coo.data[mask]


def validate_sddm(a, *, tol: float = ZERO_TOL, allow_disconnected: bool = False) -> ValidationResult:
    """Check symmetry, sign pattern, row sums and nonsingularity; report the first violation."""
    m = canonical_csr(a)
    n, n2 = m.shape
    if n != n2:
        return ValidationResult(False, error=f"matrix is not square: {m.shape}")
    if n == 0:
        return ValidationResult(False, error="empty matrix")
    if not np.all(np.isfinite(m.data)):
        return ValidationResult(False, error="non-finite entry")
    scale = float(np.abs(m.data).max()) if m.nnz else 0.0
    atol = tol * scale

    rows, cols, vals = _offdiag_coo(m)
    bad = np.flatnonzero(vals > atol)
    if bad.size:
        i, j = int(rows[bad[0]]), int(cols[bad[0]])
        return ValidationResult(False, error=f"positive off-diagonal at ({i},{j})", where=(i, j))

    diff = (m - m.T).tocoo()
    bad = np.flatnonzero(np.abs(diff.data) > atol)
    if bad.size:
        order = np.lexsort((diff.col[bad], diff.row[bad]))
        k = bad[order[0]]
        i, j = int(diff.row[k]), int(diff.col[k])
        return ValidationResult(False, error=f"asymmetric entry at ({i},{j})", where=(i, j))

    diag = m.diagonal()
    bad = np.flatnonzero(diag < -atol)
    if bad.size:
        i = int(bad[0])
        return ValidationResult(False, error=f"negative diagonal at ({i},{i})", where=(i, i))

    sums = np.asarray(m.sum(axis=1)).ravel()
    row_abs = np.asarray(abs(m).sum(axis=1)).ravel()
    row_tol = tol * np.maximum(row_abs, scale)
    bad = np.flatnonzero(sums < -row_tol)
    if bad.size:
        i = int(bad[0])
        return ValidationResult(False, error=f"negative row sum at row {i}", where=(i,))

    positive = sums > row_tol
    kind = "sddm" if positive.any() else "laplacian"
    pattern = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(n, n))
    ncomp, labels = csgraph.connected_components(pattern, directed=False)
    if kind == "laplacian":
        if ncomp > 1 and not allow_disconnected:
            comps = tuple(tuple(np.flatnonzero(labels == c).tolist()) for c in range(ncomp))
            return ValidationResult(False, kind=kind, error=f"disconnected Laplacian: {ncomp} components", where=comps)
        return ValidationResult(True, kind=kind)
    grounded = np.zeros(ncomp, dtype=bool)
    grounded[labels[positive]] = True
    if not grounded.all():
        missing = np.flatnonzero(~grounded)
        comps = tuple(tuple(np.flatnonzero(labels == c).tolist()) for c in missing)
        if not allow_disconnected:
            return ValidationResult(False, kind=kind, error=f"singular: {missing.size} component(s) with zero row sums", where=comps)
        kind = "mixed"
    return ValidationResult(True, kind=kind)


class SddmMatrix:
    """Immutable symmetric SDDM or Laplacian matrix in canonical CSR form.

    The excess/Laplacian split is cached; when the matrix is built from an
    explicit split (``from_xl``) that split is kept verbatim.
    """

    __slots__ = ("_mat", "_kind", "_xl")

    def __init__(self, a, *, check: bool = True, tol: float = ZERO_TOL, allow_disconnected: bool = False):
        mat = canonical_csr(a)
        if check:
            res = validate_sddm(mat, tol=tol, allow_disconnected=allow_disconnected)
            res.raise_if_invalid()
            kind = res.kind
        else:
            sums = np.asarray(mat.sum(axis=1)).ravel()
            scale = float(np.abs(mat.data).max()) if mat.nnz else 0.0
            kind = "sddm" if np.any(sums > tol * max(scale, 1e-300)) else "laplacian"
        self._mat = _freeze(mat)
        self._kind = kind
        self._xl = None

    @classmethod
    def from_xl(cls, x, laplacian, *, check: bool = False) -> "SddmMatrix":
        x = np.asarray(x, dtype=float)
        lap = canonical_csr(laplacian)
        obj = cls(lap + sp.diags(x, format="csr"), check=check)
        x = x.copy()
        x.flags.writeable = False
        obj._xl = XlDecomposition(x, SddmMatrix(lap, check=False))
        return obj

    @property
    def mat(self) -> sp.csr_matrix:
        return self._mat

    @property
    def n(self) -> int:
        return self._mat.shape[0]

    @property
    def shape(self) -> tuple:
        return self._mat.shape

    @property
    def nnz(self) -> int:
        return self._mat.nnz

    @property
    def kind(self) -> str:
        return self._kind

    @property
    def is_laplacian(self) -> bool:
        return self._kind == "laplacian"

    def toarray(self) -> np.ndarray:
        return self._mat.toarray()

    def diagonal(self) -> np.ndarray:
        return self._mat.diagonal()

    def row_sums(self) -> np.ndarray:
        return np.asarray(self._mat.sum(axis=1)).ravel()

    def __matmul__(self, v):
        return self._mat @ v

    def __repr__(self) -> str:
        return f"SddmMatrix(n={self.n}, nnz={self.nnz}, kind={self._kind})"


@dataclass(frozen=True)
class XlDecomposition:
    x: np.ndarray
    laplacian: SddmMatrix


def xl_decompose(m) -> XlDecomposition:
    """Split M into a nonnegative diagonal excess plus a Laplacian."""
    if isinstance(m, SddmMatrix) and m._xl is not None:
        return m._xl
    mat = canonical_csr(m)
    n = mat.shape[0]
    diag = mat.diagonal()
    off = mat - sp.diags(diag, format="csr")
    off.eliminate_zeros()
    deg = -np.asarray(off.sum(axis=1)).ravel()
    x = np.maximum(diag - deg, 0.0)
    lap_diag = diag - x
    # nudge x so that x + lap_diag reproduces the stored diagonal exactly
    for _ in range(8):
        recomposed = x + lap_diag
        hi = recomposed > diag
        lo = recomposed < diag
        if not (hi.any() or lo.any()):
            break
        x[hi] = np.nextafter(x[hi], -np.inf)
        x[lo] = np.nextafter(x[lo], np.inf)
        x = np.maximum(x, 0.0)
        lap_diag = np.where(x == 0.0, diag, lap_diag)
    lap = (off + sp.diags(lap_diag, format="csr")).tocsr()
    lap.sort_indices()
    x.flags.writeable = False
    res = XlDecomposition(x, SddmMatrix(lap, check=False))
    if isinstance(m, SddmMatrix):
        m._xl = res
    return res


@dataclass(frozen=True)
class IndexPartition:
    f: np.ndarray
    c: np.ndarray
    n: int = field(default=0)

    @classmethod
    def from_f(cls, n: int, f, *, allow_empty: bool = False) -> "IndexPartition":
        f = np.unique(np.asarray(f, dtype=np.int64))
        if f.size and (f[0] < 0 or f[-1] >= n):
            raise IndexError("F index out of range")
        mask = np.ones(n, dtype=bool)
        mask[f] = False
        c = np.flatnonzero(mask)
        if not allow_empty and (f.size == 0 or c.size == 0):
            raise ValueError("partition blocks must both be nonempty")
        return cls(f, c, n)


def as_partition(part, n: int, *, allow_empty: bool = True) -> IndexPartition:
    if isinstance(part, IndexPartition):
        if part.n != n:
            raise ValueError("partition size does not match matrix")
        return part
    return IndexPartition.from_f(n, part, allow_empty=allow_empty)


def blocks(m, part) -> tuple:
    """Return (M_FF, M_FC, M_CF, M_CC) as CSR matrices."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0])
    rows_f = mat[p.f]
    rows_c = mat[p.c]
    return (rows_f[:, p.f].tocsr(), rows_f[:, p.c].tocsr(), rows_c[:, p.f].tocsr(), rows_c[:, p.c].tocsr())


def restrict(m, rows, cols=None) -> sp.csr_matrix:
    mat = canonical_csr(m)
    rows = np.asarray(rows, dtype=np.int64)
    cols = rows if cols is None else np.asarray(cols, dtype=np.int64)
    return mat[rows][:, cols].tocsr()


def matvec(m, v) -> np.ndarray:
    mat = canonical_csr(m)
    v = np.asarray(v, dtype=float)
    if v.shape[0] != mat.shape[1]:
        raise ValueError(f"dimension mismatch: {mat.shape} vs {v.shape}")
    return mat @ v


def add(a, b, *, check: bool = False) -> SddmMatrix:
    return SddmMatrix(canonical_csr(a) + canonical_csr(b), check=check)


def scale(a, s: float) -> SddmMatrix:
    if s < 0:
        raise ValueError("negative scale breaks the SDDM sign pattern")
    return SddmMatrix(canonical_csr(a) * s, check=False)


def clean_offdiagonal(mat: sp.csr_matrix, tol: float = ZERO_TOL) -> sp.csr_matrix:
    """Symmetrize and zero out positive off-diagonal round-off below tol * max|entry|."""
    mat = sp.csr_matrix(0.5 * (mat + mat.T))
    if mat.nnz == 0:
        return mat
    coo = mat.tocoo()
    atol = tol * float(np.abs(coo.data).max())
    drop = (coo.row != coo.col) & (coo.data > 0) & (coo.data <= atol)
    if drop.any():
        coo.data[drop] = 0.0
    out = coo.tocsr()
    out.sum_duplicates()
    out.eliminate_zeros()
    out.sort_indices()
    return out


def _schur_correction(m_ff, m_fc, m_cf, nbr_cols, dense: bool) -> np.ndarray:
    rhs_full = m_fc[:, nbr_cols]
    left = m_cf[nbr_cols]
    k = nbr_cols.size
    corr = np.zeros((k, k))
    if dense:
        sol = la.solve(m_ff.toarray(), rhs_full.toarray(), assume_a="pos")
        return np.asarray(left @ sol)
    lu = splu(sp.csc_matrix(m_ff))
    block = 256
    for start in range(0, k, block):
        stop = min(k, start + block)
        sol = lu.solve(rhs_full[:, start:stop].toarray())
        corr[:, start:stop] = left @ sol
    return corr


def exact_schur(m, part, *, check: bool = True) -> SddmMatrix:
    """Schur complement M_CC - M_CF M_FF^{-1} M_FC."""
    mat = canonical_csr(m)
    p = as_partition(part, mat.shape[0])
    if p.c.size == 0:
        raise ValueError("cannot eliminate every index")
    if p.f.size == 0:
        return m if isinstance(m, SddmMatrix) else SddmMatrix(mat, check=check)
    m_ff, m_fc, m_cf, m_cc = blocks(mat, p)
    ncomp, labels = csgraph.connected_components(m_ff, directed=False)
    excess_ff = np.asarray(m_ff.sum(axis=1)).ravel()
    scale_ff = float(np.abs(m_ff.data).max()) if m_ff.nnz else 0.0
    has_excess = np.zeros(ncomp, dtype=bool)
    has_excess[labels[excess_ff > ZERO_TOL * scale_ff]] = True
    if not has_excess.all():
        raise np.linalg.LinAlgError("singular F block: a component lies entirely inside F")
    nbr_cols = np.unique(m_fc.indices)
    if nbr_cols.size == 0:
        return SddmMatrix(m_cc, check=check)
    corr = _schur_correction(m_ff, m_fc, m_cf, nbr_cols, p.f.size <= DENSE_SCHUR_MAX_F)
    ii, jj = np.meshgrid(nbr_cols, nbr_cols, indexing="ij")
    corr_sp = sp.csr_matrix((corr.ravel(), (ii.ravel(), jj.ravel())), shape=m_cc.shape)
    out = clean_offdiagonal(m_cc - corr_sp)
    return SddmMatrix(out, check=check, tol=1e-9, allow_disconnected=True)


@dataclass(frozen=True)
class LoewnerReport:
    lower: float
    upper: float
    epsilon_achieved: float
    passes: bool
    eps: float


def _dense(a) -> np.ndarray:
    if isinstance(a, np.ndarray):
        return np.asarray(a, dtype=float)
    return canonical_csr(a).toarray()


def generalized_extremes(a, b, *, null_tol: float = 1e-10) -> tuple:
    """Extremal eigenvalues of the pencil (A, B) on the range of B."""
    ad = _dense(a)
    bd = _dense(b)
    if ad.shape != bd.shape or ad.shape[0] != ad.shape[1]:
        raise ValueError(f"dimension mismatch: {ad.shape} vs {bd.shape}")
    ad = 0.5 * (ad + ad.T)
    bd = 0.5 * (bd + bd.T)
    try:
        chol = la.cholesky(bd, lower=True)
        # a tiny pivot means B is numerically singular even though the factorization went through
        if np.min(np.diag(chol)) ** 2 > null_tol * np.max(np.abs(np.diag(bd))):
            vals = la.eigh(ad, bd, eigvals_only=True)
            return float(vals[0]), float(vals[-1])
    except la.LinAlgError:
        pass
    w, v = la.eigh(bd)
    top = max(abs(w[-1]), 1e-300)
    keep = w > null_tol * top
    null = v[:, ~keep]
    if null.size:
        leak = np.linalg.norm(ad @ null)
        if leak > 1e-8 * max(np.linalg.norm(ad), 1e-300):
            raise ValueError("null-space mismatch between A and B")
    q = v[:, keep] / np.sqrt(w[keep])
    red = q.T @ ad @ q
    vals = np.linalg.eigvalsh(0.5 * (red + red.T))
    return float(vals[0]), float(vals[-1])


def loewner_approx_check(a, b, eps: float) -> LoewnerReport:
    """Certify e^{-eps} B <= A <= e^{eps} B with dense generalized eigenvalues."""
    lower, upper = generalized_extremes(a, b)
    if lower <= 0:
        achieved = float("inf")
    else:
        achieved = float(np.log(max(upper, 1.0 / lower)))
    passes = lower >= np.exp(-eps) - LOEWNER_SLACK and upper <= np.exp(eps) + LOEWNER_SLACK
    return LoewnerReport(lower, upper, achieved, bool(passes), float(eps))


def laplacian_from_edges(n: int, u, v, w) -> sp.csr_matrix:
    u = np.asarray(u, dtype=np.int64)
    v = np.asarray(v, dtype=np.int64)
    w = np.asarray(w, dtype=float)
    keep = u != v
    u, v, w = u[keep], v[keep], w[keep]
    rows = np.concatenate([u, v, u, v])
    cols = np.concatenate([v, u, u, v])
    vals = np.concatenate([-w, -w, w, w])
    mat = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    mat.sum_duplicates()
    mat.sort_indices()
    mat.eliminate_zeros()
    return mat


def edges_of(m) -> tuple:
    """Upper-triangle edges (u, v, w) of the off-diagonal part, w > 0."""
    mat = canonical_csr(m)
    upper = sp.triu(mat, k=1).tocoo()
    keep = upper.data < 0
    return upper.row[keep].astype(np.int64), upper.col[keep].astype(np.int64), -upper.data[keep]


def strong_dominance(m, rows=None) -> float:
    """Largest alpha with M_ii >= (1+alpha) sum_j |M_ij| over the given rows (inf if no off-diagonals)."""
    mat = canonical_csr(m)
    diag = mat.diagonal()
    off = np.asarray(abs(mat).sum(axis=1)).ravel() - np.abs(diag)
    if rows is not None:
        diag, off = diag[rows], off[rows]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(off > 0, diag / np.where(off > 0, off, 1.0), np.inf)
    return float(ratio.min() - 1.0) if ratio.size else float("inf")
