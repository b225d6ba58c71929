"""Vertex-sparsifier chains: construction, application as a preconditioner, and U^T D U conversion."""

from __future__ import annotations

import io
import json
import math
import struct
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .jacobi import JacobiOperator, NnzBudgetExceeded, apply_jacobi, jacobi_from_block, jacobi_order, materialize_jacobi
from .rng import derive_seed
from .schur import approx_schur
from .sddm import SddmMatrix, as_partition, blocks, strong_dominance, validate_sddm
from .sparsify import SparsifyParams, sparsify
from .subsets import SubsetParams, low_degree_subset, sdd_subset

MAGIC = b"SCHC"
FORMAT_VERSION = 1
# sum over k >= 1 of 1/(k ln^2(k+4)): partial sum to 1e7 is 1.1775, tail <= 1/ln(1e7)
EPS_SCHEDULE_SUM_BOUND = 1.24


class ChainError(RuntimeError):
    pass


class ChainFormatError(ChainError):
    """A saved chain file is unreadable: wrong magic, version or length."""


def default_eps(k: int, scale: float = 1.0) -> float:
    """Level accuracy 1 / (k ln^2(k + 4)), optionally scaled."""
    return min(0.5, scale / (k * math.log(k + 4) ** 2))


@dataclass(frozen=True)
class ChainOptions:
    alpha: float = 4.0
    final_size: int = 100
    seed: int = 0
    subset: str = "random"
    eps_scale: float = 1.0
    sparsify_c: float = 8.0
    exact_sparsify_below: int = 64
    prefer_exact: bool = True
    validate_levels: bool = True
    max_levels: int = 100_000

    def eps(self, k: int) -> float:
        return default_eps(k, self.eps_scale)


class ChainLevel:
    """One elimination step: M^(i), its F block, accuracy and series order."""

    def __init__(self, m: SddmMatrix, f, alpha: float, eps: float, k: int, index, *,
                 measured_alpha: float | None = None, sparsify_eps: float = 0.0):
        self.m = m
        part = as_partition(f, m.n, allow_empty=False)
        self.f = part.f
        self.c = part.c
        self.alpha = float(alpha)
        self.eps = float(eps)
        self.k = int(k)
        self.index = np.asarray(index, dtype=np.int64)
        m_ff, m_fc, m_cf, _ = blocks(m, part)
        self.measured_alpha = strong_dominance(m_ff) if measured_alpha is None else float(measured_alpha)
        self.sparsify_eps = float(sparsify_eps)
        self.jacobi: JacobiOperator = jacobi_from_block(m_ff, self.k)
        self.m_fc = m_fc
        self.m_cf = m_cf

    @property
    def n(self) -> int:
        return self.m.n

    def apply_work(self) -> int:
        return 2 * self.jacobi.work() + self.m_fc.nnz + self.m_cf.nnz + self.c.size + self.f.size

    def stats(self) -> dict:
        return {"n": self.n, "nnz": self.m.nnz, "f": int(self.f.size), "eps": self.eps, "k": self.k,
                "alpha": self.alpha, "measured_alpha": self.measured_alpha, "sparsify_eps": self.sparsify_eps}


@dataclass
class VertexSparsifierChain:
    levels: list
    final: SddmMatrix
    final_index: np.ndarray
    eps0: float
    options: ChainOptions = field(default_factory=ChainOptions)
    final_sparsify_eps: float = 0.0

    def __post_init__(self):
        self._factor = la.cho_factor(self.final.toarray(), lower=False) if self.final.n else None

    @property
    def n(self) -> int:
        return self.levels[0].n if self.levels else self.final.n

    @property
    def error_bound(self) -> float:
        """Declared Loewner accuracy of the inverse of the chain operator against the input."""
        total = sum(2 * lev.eps + lev.sparsify_eps for lev in self.levels)
        return total + self.final_sparsify_eps

    def apply_work(self) -> int:
        d = self.final.n
        return sum(lev.apply_work() for lev in self.levels) + d * (d + 1)

    def stats(self) -> dict:
        return {
            "levels": [lev.stats() for lev in self.levels],
            "final_n": self.final.n,
            "final_nnz": self.final.nnz,
            "eps0": self.eps0,
            "error_bound": self.error_bound,
            "apply_work": self.apply_work(),
            "options": asdict(self.options),
        }


def _sparsify_level(m: SddmMatrix, eps: float, opts: ChainOptions, seed: int):
    out = sparsify(m, SparsifyParams(eps=eps, c=opts.sparsify_c, seed=seed, exact_below=opts.exact_sparsify_below))
    return out, (out is not m)


def black_box_construct(m, opts: ChainOptions = ChainOptions()) -> VertexSparsifierChain:
    """Alternate sparsification, dominant-subset selection and approximate Schur complements."""
    cur = m if isinstance(m, SddmMatrix) else SddmMatrix(m)
    if cur.is_laplacian:
        raise ChainError("Laplacian input: ground it first (see laplacian_solve)")
    if opts.alpha < 4:
        raise ValueError("alpha must be at least 4")
    pick = low_degree_subset if opts.subset == "low-degree" else sdd_subset
    index = np.arange(cur.n)
    eps0 = opts.eps(1)
    cur, changed = _sparsify_level(cur, eps0, opts, derive_seed(opts.seed, 0))
    sp_eps = eps0 if changed else 0.0
    eps0_used = sp_eps
    levels = []
    k = 1
    while cur.n > opts.final_size:
        if k > opts.max_levels:
            raise ChainError("level limit reached")
        eps_k = opts.eps(k)
        f = pick(cur, SubsetParams(alpha=opts.alpha, seed=derive_seed(opts.seed, k, 1)))
        part = as_partition(f, cur.n, allow_empty=False)
        nxt = approx_schur(cur, part, opts.alpha, eps_k, seed=derive_seed(opts.seed, k, 2),
                           prefer_exact=opts.prefer_exact)
        levels.append(ChainLevel(cur, part.f, opts.alpha, eps_k, jacobi_order(opts.alpha, eps_k), index,
                                 sparsify_eps=sp_eps))
        if opts.validate_levels:
            res = validate_sddm(nxt, tol=1e-9, allow_disconnected=True)
            if not res.ok:
                raise ChainError(f"level {k} produced an invalid matrix: {res.error}")
        index = index[part.c]
        k += 1
        sp_eps = 0.0
        if nxt.n > opts.final_size:
            nxt, changed = _sparsify_level(nxt, opts.eps(k), opts, derive_seed(opts.seed, k, 0))
            sp_eps = opts.eps(k) if changed else 0.0
        cur = nxt
    final_sp = sp_eps if not levels else 0.0
    return VertexSparsifierChain(levels, cur, index, eps0_used, opts, final_sparsify_eps=final_sp)


def apply_chain(ch: VertexSparsifierChain, b) -> np.ndarray:
    """Forward elimination through every level, dense base solve, back substitution."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != ch.n:
        raise ValueError(f"dimension mismatch: chain has {ch.n} rows, got {b.shape[0]}")
    rhs = b
    saved = []
    for lev in ch.levels:
        xf = apply_jacobi(lev.jacobi, rhs[lev.f])
        rhs = rhs[lev.c] - lev.m_cf @ xf
        saved.append(xf)
    x = la.cho_solve(ch._factor, rhs)
    for lev, xf in zip(reversed(ch.levels), reversed(saved)):
        out = np.empty((lev.n,) + x.shape[1:])
        out[lev.c] = x
        out[lev.f] = xf - apply_jacobi(lev.jacobi, lev.m_fc @ x)
        x = out
    return x


# ---------------------------------------------------------------- U^T D U


@dataclass(frozen=True)
class UduFactorization:
    d: np.ndarray
    u: sp.csr_matrix
    perm: np.ndarray
    block_bounds: tuple
    base_start: int

    @property
    def n(self) -> int:
        return self.d.size

    def assembled(self) -> sp.csr_matrix:
        """U^T D U in original indexing."""
        core = (self.u.T @ sp.diags(self.d) @ self.u).tocsr()
        return core[self.perm][:, self.perm].tocsr()


def decompose(ch: VertexSparsifierChain, nnz_budget: int | None = None) -> UduFactorization:
    """Materialize the chain as unit upper-triangular U and diagonal D in elimination order."""
    n = ch.n
    order = [lev.index[lev.f] for lev in ch.levels] + [ch.final_index]
    elim = np.concatenate(order)
    perm = np.empty(n, dtype=np.int64)
    perm[elim] = np.arange(n)
    rows, cols, vals, dvals = [], [], [], []
    bounds = []
    start = 0
    for i, lev in enumerate(ch.levels):
        try:
            z = materialize_jacobi(lev.jacobi, nnz_budget)
        except NnzBudgetExceeded as err:
            raise NnzBudgetExceeded(f"level {i}: {err}", err.row) from err
        blk = (z @ lev.m_fc).tocoo()
        fpos = perm[lev.index[lev.f]]
        cpos = perm[lev.index[lev.c]]
        rows += [fpos, fpos[blk.row]]
        cols += [fpos, cpos[blk.col]]
        vals += [np.ones(fpos.size), blk.data]
        dvals.append(lev.jacobi.x_ff)
        bounds.append((start, start + fpos.size))
        start += fpos.size
    base = ch.final.toarray()
    upper = la.cholesky(base, lower=False)
    piv = np.diag(upper).copy()
    unit = upper / piv[:, None]
    bpos = perm[ch.final_index]
    bi, bj = np.nonzero(np.triu(unit))
    rows.append(bpos[bi])
    cols.append(bpos[bj])
    vals.append(unit[bi, bj])
    dvals.append(piv ** 2)
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    u = sp.csr_matrix((vals, (rows, cols)), shape=(n, n))
    u.sum_duplicates()
    u.sort_indices()
    d = np.concatenate(dvals) if dvals else np.zeros(0)
    diag = u.diagonal()
    u = (u - sp.diags(diag) + sp.identity(n)).tocsr()
    u.sort_indices()
    return UduFactorization(d, u, perm, tuple(bounds), start)


def udu_solve(fac: UduFactorization, b) -> np.ndarray:
    """x = U^{-1} D^{-1} U^{-T} b by blockwise substitution in elimination order."""
    b = np.asarray(b, dtype=float)
    if b.shape[0] != fac.n:
        raise ValueError("dimension mismatch")
    y = np.empty_like(b)
    y[fac.perm] = b
    s0 = fac.base_start
    for s, e in fac.block_bounds:
        if e < fac.n:
            y[e:] -= fac.u[s:e, e:].T @ y[s:e]
    base_u = fac.u[s0:, s0:].toarray()
    if s0 < fac.n:
        y[s0:] = la.solve_triangular(base_u, y[s0:], trans="T", unit_diagonal=True)
    z = y / (fac.d if y.ndim == 1 else fac.d[:, None])
    if s0 < fac.n:
        z[s0:] = la.solve_triangular(base_u, z[s0:], unit_diagonal=True)
    for s, e in reversed(fac.block_bounds):
        if e < fac.n:
            z[s:e] -= fac.u[s:e, e:] @ z[e:]
    return z[fac.perm]


# ---------------------------------------------------------------- serialization


def _write_matrix(buf, mat: sp.csr_matrix) -> None:
    buf.write(struct.pack("<QQ", mat.shape[0], mat.nnz))
    buf.write(np.asarray(mat.indptr, dtype="<i8").tobytes())
    buf.write(np.asarray(mat.indices, dtype="<i8").tobytes())
    buf.write(np.asarray(mat.data, dtype="<f8").tobytes())


def _read_array(buf, dtype, count):
    size = np.dtype(dtype).itemsize * count
    raw = buf.read(size)
    if len(raw) != size:
        raise ChainFormatError("truncated chain file")
    return np.frombuffer(raw, dtype=dtype).copy()


def _unpack(fmt: str, buf):
    size = struct.calcsize(fmt)
    raw = buf.read(size)
    if len(raw) != size:
        raise ChainFormatError("truncated chain file")
    return struct.unpack(fmt, raw)


def _read_matrix(buf) -> SddmMatrix:
    n, nnz = _unpack("<QQ", buf)
    indptr = _read_array(buf, "<i8", n + 1)
    indices = _read_array(buf, "<i8", nnz)
    data = _read_array(buf, "<f8", nnz)
    return SddmMatrix(sp.csr_matrix((data, indices, indptr), shape=(n, n)), check=False)


def save_chain(ch: VertexSparsifierChain, path) -> None:
    buf = io.BytesIO()
    opts = json.dumps(asdict(ch.options), sort_keys=True).encode()
    buf.write(MAGIC)
    buf.write(struct.pack("<IIQ", FORMAT_VERSION, len(ch.levels), ch.n))
    buf.write(struct.pack("<ddI", ch.eps0, ch.final_sparsify_eps, len(opts)))
    buf.write(opts)
    for lev in ch.levels:
        _write_matrix(buf, lev.m.mat)
        mask = np.zeros(lev.n, dtype=bool)
        mask[lev.f] = True
        buf.write(np.packbits(mask).tobytes())
        buf.write(struct.pack("<ddIdd", lev.alpha, lev.eps, lev.k, lev.measured_alpha, lev.sparsify_eps))
        buf.write(np.asarray(lev.index, dtype="<i8").tobytes())
    _write_matrix(buf, ch.final.mat)
    buf.write(np.asarray(ch.final_index, dtype="<i8").tobytes())
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_chain(path) -> VertexSparsifierChain:
    with open(path, "rb") as fh:
        buf = io.BytesIO(fh.read())
    if buf.read(4) != MAGIC:
        raise ChainFormatError("not a chain file")
    version, count, _ = _unpack("<IIQ", buf)
    if version != FORMAT_VERSION:
        raise ChainFormatError(f"unsupported chain format version {version}")
    eps0, final_sp, olen = _unpack("<ddI", buf)
    opts = ChainOptions(**json.loads(buf.read(olen).decode()))
    levels = []
    for _ in range(count):
        m = _read_matrix(buf)
        nbytes = (m.n + 7) // 8
        mask = np.unpackbits(_read_array(buf, np.uint8, nbytes))[: m.n].astype(bool)
        alpha, eps, k, measured, sp_eps = _unpack("<ddIdd", buf)
        index = _read_array(buf, "<i8", m.n)
        levels.append(ChainLevel(m, np.flatnonzero(mask), alpha, eps, k, index,
                                 measured_alpha=measured, sparsify_eps=sp_eps))
    final = _read_matrix(buf)
    final_index = _read_array(buf, "<i8", final.n)
    return VertexSparsifierChain(levels, final, final_index, eps0, opts, final_sparsify_eps=final_sp)
