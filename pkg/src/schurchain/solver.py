"""Chain-preconditioned solves for SDDM and Laplacian systems."""

from __future__ import annotations

import math
import time
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
from scipy.sparse import csgraph

from .chain import ChainOptions, VertexSparsifierChain, apply_chain, black_box_construct
from .sddm import SddmMatrix, canonical_csr


class ConvergenceWarning(UserWarning):
    pass


@dataclass
class SolveReport:
    iterations: int
    error_estimate: float
    residual_norms: list = field(default_factory=list)
    wall_time: float = 0.0
    converged: bool = True
    monotone: bool = True
    method: str = "refinement"
    error_bound: float = 0.0
    oracle_error: float | None = None
    chain_stats: dict | None = None


def _energy(mat, v) -> float:
    return float(v @ (mat @ v))


def iteration_cap(eps: float, per_digit: float = 10.0) -> int:
    return int(math.ceil(per_digit * math.log(1.0 / eps))) + 10


def _refine(mat, b, precond, eps, gamma, cap, step=1.0):
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    bwb = float(b @ z)
    history = []
    est = math.inf
    for it in range(cap + 1):
        rz = max(float(r @ z), 0.0)
        history.append(math.sqrt(rz))
        est = math.exp(gamma) * math.sqrt(rz / bwb)
        if est <= eps or it == cap:
            return x, it, est, history
        x = x + step * z
        r = b - mat @ x
        z = precond(r)
    return x, cap, est, history


def _pcg(mat, b, precond, eps, gamma, cap):
    x = np.zeros_like(b)
    r = b.copy()
    z = precond(r)
    bwb = float(b @ z)
    p = z.copy()
    rz = float(r @ z)
    history = [math.sqrt(max(rz, 0.0))]
    est = math.exp(gamma) * math.sqrt(max(rz, 0.0) / bwb)
    it = 0
    while est > eps and it < cap:
        ap = mat @ p
        step = rz / float(p @ ap)
        x = x + step * p
        r = r - step * ap
        z = precond(r)
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        it += 1
        history.append(math.sqrt(max(rz, 0.0)))
        est = math.exp(gamma) * math.sqrt(max(rz, 0.0) / bwb)
    return x, it, est, history


def _monotone(history, warmup: int = 2) -> bool:
    tail = history[warmup:]
    return all(b <= a * (1 + 1e-12) + 1e-300 for a, b in zip(tail, tail[1:]))


def solve(m, b, eps: float = 1e-8, *, chain: VertexSparsifierChain | None = None,
          options: ChainOptions = ChainOptions(), method: str = "refinement", max_iter: int | None = None,
          oracle: bool = False, error_bound: float | None = None):
    """Return (x, report) with ||x - M^{-1} b||_M <= eps ||M^{-1} b||_M (estimated via the chain bound)."""
    start = time.perf_counter()
    sm = m if isinstance(m, SddmMatrix) else SddmMatrix(m)
    mat = sm.mat
    b = np.asarray(b, dtype=float)
    if b.shape != (sm.n,):
        raise ValueError("right-hand side has the wrong shape")
    if not np.any(b):
        return np.zeros_like(b), SolveReport(0, 0.0, [0.0], time.perf_counter() - start, method=method)
    if chain is None:
        chain = black_box_construct(sm, options)
    gamma = chain.error_bound if error_bound is None else error_bound
    cap = iteration_cap(eps) if max_iter is None else max_iter
    precond = lambda v: apply_chain(chain, v)  # noqa: E731
    if method == "refinement":
        x, its, est, hist = _refine(mat, b, precond, eps, gamma, cap)
    elif method == "cg":
        x, its, est, hist = _pcg(mat, b, precond, eps, gamma, cap)
    else:
        raise ValueError(f"unknown method {method!r}")
    report = SolveReport(its, est, hist, 0.0, converged=est <= eps, monotone=_monotone(hist), method=method,
                         error_bound=gamma, chain_stats=chain.stats())
    if not report.converged:
        warnings.warn(f"no convergence within {cap} iterations (estimate {est:.3g})", ConvergenceWarning, stacklevel=2)
    if oracle:
        exact = la.solve(mat.toarray(), b, assume_a="pos")
        report.oracle_error = math.sqrt(_energy(mat, x - exact) / _energy(mat, exact))
    report.wall_time = time.perf_counter() - start
    return x, report


def ground(lap) -> tuple:
    """Minor of a Laplacian with the lowest index of each component removed."""
    mat = canonical_csr(lap)
    ncomp, labels = csgraph.connected_components(mat, directed=False)
    _, first = np.unique(labels, return_index=True)
    keep = np.setdiff1d(np.arange(mat.shape[0]), first)
    return mat[keep][:, keep].tocsr(), keep, labels


def laplacian_solve(lap, b, eps: float = 1e-8, **kwargs):
    """Minimum-norm solution of L x = b, grounding one vertex per component."""
    mat = canonical_csr(lap)
    n = mat.shape[0]
    if n == 0:
        raise ValueError("empty graph")
    b = np.asarray(b, dtype=float)
    minor, keep, labels = ground(mat)
    counts = np.bincount(labels)
    means = np.bincount(labels, weights=b) / counts
    proj = b - means[labels]
    if np.linalg.norm(proj - b) > 1e-10 * max(np.linalg.norm(b), 1e-300):
        warnings.warn("right-hand side projected onto the range of the Laplacian", stacklevel=2)
    x = np.zeros(n)
    report = SolveReport(0, 0.0)
    if keep.size and np.any(proj[keep]):
        x_keep, report = solve(SddmMatrix(minor, allow_disconnected=True), proj[keep], eps, **kwargs)
        x[keep] = x_keep
    x -= (np.bincount(labels, weights=x) / counts)[labels]
    return x, report


class ChainSolver:
    """Build a chain once with ``fit``, then solve many right-hand sides."""

    def __init__(self, eps: float = 1e-8, options: ChainOptions = ChainOptions(), method: str = "refinement"):
        self.eps = eps
        self.options = options
        self.method = method

    def fit(self, m) -> "ChainSolver":
        sm = m if isinstance(m, SddmMatrix) else SddmMatrix(m, allow_disconnected=True)
        self.matrix_ = sm
        self.laplacian_ = sm.is_laplacian
        if self.laplacian_:
            minor, self.keep_, self.labels_ = ground(sm.mat)
            self.chain_ = black_box_construct(SddmMatrix(minor, allow_disconnected=True), self.options)
            self.minor_ = minor
        else:
            self.chain_ = black_box_construct(sm, self.options)
        return self

    def solve(self, b) -> np.ndarray:
        if not hasattr(self, "chain_"):
            raise RuntimeError("call fit first")
        b = np.asarray(b, dtype=float)
        if not self.laplacian_:
            x, self.report_ = solve(self.matrix_, b, self.eps, chain=self.chain_, method=self.method)
            return x
        counts = np.bincount(self.labels_)
        proj = b - (np.bincount(self.labels_, weights=b) / counts)[self.labels_]
        x = np.zeros_like(proj)
        x[self.keep_], self.report_ = solve(self.minor_, proj[self.keep_], self.eps, chain=self.chain_,
                                            method=self.method)
        return x - (np.bincount(self.labels_, weights=x) / counts)[self.labels_]
