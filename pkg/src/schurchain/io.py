"""Matrix Market (symmetric coordinate) and weighted edge-list I/O."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .sddm import SddmMatrix, canonical_csr, edges_of, laplacian_from_edges


class ParseError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


def _number(tok: str, line: int, what: str, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise ParseError(f"malformed {what} {tok!r}", line) from None


def read_matrix_market(path, *, validate: bool = True) -> SddmMatrix:
    """Read a real symmetric coordinate file (lower triangle) or a general one, mirroring as needed."""
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or not lines[0].lower().startswith("%%matrixmarket"):
        raise ParseError("missing %%MatrixMarket header", 1)
    head = lines[0].lower().split()
    if len(head) < 5 or head[1] != "matrix" or head[2] != "coordinate":
        raise ParseError("only 'matrix coordinate' files are supported", 1)
    field, symmetry = head[3], head[4]
    if field not in ("real", "integer", "double"):
        raise ParseError(f"unsupported field {field!r}", 1)
    if symmetry not in ("symmetric", "general"):
        raise ParseError(f"unsupported symmetry {symmetry!r}", 1)
    pos = 1
    while pos < len(lines) and (not lines[pos].strip() or lines[pos].lstrip().startswith("%")):
        pos += 1
    if pos >= len(lines):
        raise ParseError("missing size line", pos + 1)
    size = lines[pos].split()
    if len(size) != 3:
        raise ParseError("size line needs rows, cols, entries", pos + 1)
    nr, nc, nnz = (_number(t, pos + 1, "size", int) for t in size)
    if nr != nc:
        raise ParseError("matrix is not square", pos + 1)
    rows, cols, vals = [], [], []
    for lineno in range(pos + 2, len(lines) + 1):
        text = lines[lineno - 1].strip()
        if not text or text.startswith("%"):
            continue
        toks = text.split()
        if len(toks) != 3:
            raise ParseError("expected 'row col value'", lineno)
        i = _number(toks[0], lineno, "row index", int)
        j = _number(toks[1], lineno, "column index", int)
        w = _number(toks[2], lineno, "value")
        if not (1 <= i <= nr and 1 <= j <= nc):
            raise ParseError("index out of range", lineno)
        if symmetry == "symmetric" and j > i:
            raise ParseError("symmetric files store the lower triangle only", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(w)
    if len(vals) != nnz:
        raise ParseError(f"expected {nnz} entries, found {len(vals)}")
    r, c, v = np.array(rows, dtype=np.int64), np.array(cols, dtype=np.int64), np.array(vals, dtype=float)
    if symmetry == "symmetric":
        off = r != c
        r, c, v = np.concatenate([r, c[off]]), np.concatenate([c, r[off]]), np.concatenate([v, v[off]])
    mat = sp.csr_matrix((v, (r, c)), shape=(nr, nc))
    return SddmMatrix(mat, check=validate, allow_disconnected=True)


def write_matrix_market(path, m) -> None:
    """Lower triangle in symmetric coordinate form with round-trip precision."""
    mat = canonical_csr(m)
    low = sp.tril(mat).tocoo()
    order = np.lexsort((low.row, low.col))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{mat.shape[0]} {mat.shape[1]} {low.nnz}\n")
        for k in order:
            fh.write(f"{low.row[k] + 1} {low.col[k] + 1} {float(low.data[k])!r}\n")


def read_edge_list(path, n: int | None = None) -> SddmMatrix:
    """Laplacian from 0-indexed 'u v w' lines (tab or space separated); '#' starts a comment."""
    us, vs, ws = [], [], []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if not text:
                continue
            toks = text.split()
            if len(toks) not in (2, 3):
                raise ParseError("expected 'u v w'", lineno)
            u = _number(toks[0], lineno, "vertex", int)
            v = _number(toks[1], lineno, "vertex", int)
            w = _number(toks[2], lineno, "weight") if len(toks) == 3 else 1.0
            if u < 0 or v < 0:
                raise ParseError("negative vertex id", lineno)
            if not np.isfinite(w) or w <= 0:
                raise ParseError(f"weight must be positive, got {toks[2]!r}", lineno)
            us.append(u)
            vs.append(v)
            ws.append(w)
    size = (max(max(us), max(vs)) + 1 if us else 0) if n is None else n
    lap = laplacian_from_edges(size, us, vs, ws)
    return SddmMatrix(lap, check=False)


def write_edge_list(path, m) -> None:
    u, v, w = edges_of(m)
    with open(path, "w", encoding="utf-8") as fh:
        for a, b, c in zip(u.tolist(), v.tolist(), w.tolist()):
            fh.write(f"{a}\t{b}\t{c!r}\n")


def read_vector(path) -> np.ndarray:
    vals = []
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.split("#", 1)[0].strip()
            if text and not text.startswith("%"):
                vals.extend(_number(t, lineno, "value") for t in text.split())
    return np.array(vals, dtype=float)


def write_vector(path, x) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in np.asarray(x, dtype=float).tolist():
            fh.write(f"{v!r}\n")


def ingest(path, fmt: str | None = None) -> SddmMatrix:
    fmt = fmt or ("edge-list" if str(path).endswith((".tsv", ".txt", ".edges")) else "matrix-market")
    if fmt == "matrix-market":
        return read_matrix_market(path)
    if fmt == "edge-list":
        return read_edge_list(path)
    raise ValueError(f"unknown format {fmt!r}")
