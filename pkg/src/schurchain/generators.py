"""Deterministic test corpora: grids, random regular graphs, demand graphs, barbells."""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .expanders import product_demand_graph
from .rng import make_rng
from .sddm import SddmMatrix, laplacian_from_edges


def _with_ridge(lap, ridge: float) -> SddmMatrix:
    if ridge < 0:
        raise ValueError("ridge must be nonnegative")
    n = lap.shape[0]
    return SddmMatrix(lap + ridge * sp.identity(n, format="csr") if ridge else lap, check=False)


def grid2d(k: int, ridge: float = 0.0) -> SddmMatrix:
    """k x k four-neighbour grid Laplacian plus ridge * I."""
    if k < 1:
        raise ValueError("k must be positive")
    idx = np.arange(k * k).reshape(k, k)
    u = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    v = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    return _with_ridge(laplacian_from_edges(k * k, u, v, np.ones(u.size)), ridge)


def grid3d(k: int, ridge: float = 0.0) -> SddmMatrix:
    if k < 1:
        raise ValueError("k must be positive")
    idx = np.arange(k ** 3).reshape(k, k, k)
    pairs = [(idx[:-1], idx[1:]), (idx[:, :-1], idx[:, 1:]), (idx[:, :, :-1], idx[:, :, 1:])]
    u = np.concatenate([a.ravel() for a, _ in pairs])
    v = np.concatenate([b.ravel() for _, b in pairs])
    return _with_ridge(laplacian_from_edges(k ** 3, u, v, np.ones(u.size)), ridge)


def random_regular(n: int, d: int, seed: int = 0, ridge: float = 0.0, max_tries: int = 1000) -> SddmMatrix:
    """Simple d-regular graph by the configuration model with rejection."""
    if d >= n or (n * d) % 2 or d < 1:
        raise ValueError("need 1 <= d < n and n*d even")
    rng = make_rng(seed, n, d)
    for _ in range(max_tries):
        stubs = rng.permutation(np.repeat(np.arange(n), d))
        u, v = stubs[0::2], stubs[1::2]
        if np.any(u == v):
            continue
        key = np.minimum(u, v) * n + np.maximum(u, v)
        if np.unique(key).size != key.size:
            continue
        return _with_ridge(laplacian_from_edges(n, u, v, np.ones(u.size)), ridge)
    raise RuntimeError("configuration model kept producing multi-edges")


def product_demand(d, ridge: float = 0.0) -> SddmMatrix:
    g = product_demand_graph(d)
    return _with_ridge(g.laplacian(), ridge)


def barbell(k: int, path: int = 1, ridge: float = 0.0) -> SddmMatrix:
    """Two k-cliques joined by a path with `path` edges."""
    if k < 2 or path < 1:
        raise ValueError("need k >= 2 and path >= 1")
    iu, ju = np.triu_indices(k, k=1)
    n = 2 * k + path - 1
    chain = np.concatenate([[k - 1], np.arange(2 * k, n), [k]])
    u = np.concatenate([iu, iu + k, chain[:-1]])
    v = np.concatenate([ju, ju + k, chain[1:]])
    return _with_ridge(laplacian_from_edges(n, u, v, np.ones(u.size)), ridge)


def random_sddm(n: int, density: float, seed: int = 0, ridge: float = 0.1, weights=(0.1, 1.0)) -> SddmMatrix:
    """Erdos-Renyi graph Laplacian with uniform weights plus a uniform random diagonal excess."""
    rng = make_rng(seed, n)
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    w = rng.uniform(weights[0], weights[1], keep.sum())
    lap = laplacian_from_edges(n, iu[keep], ju[keep], w)
    excess = rng.uniform(0.0, ridge, n) + ridge * 1e-3
    return SddmMatrix(lap + sp.diags(excess, format="csr"), check=False)


def power_law_graph(n: int, attach: int = 2, seed: int = 0) -> SddmMatrix:
    """Preferential-attachment graph Laplacian (unit weights)."""
    rng = make_rng(seed, n, attach)
    targets = list(range(attach))
    pool: list = []
    us, vs = [], []
    for new in range(attach, n):
        for t in set(targets):
            us.append(new)
            vs.append(t)
        pool.extend(targets)
        pool.extend([new] * attach)
        targets = [pool[i] for i in rng.integers(0, len(pool), attach)]
    return SddmMatrix(laplacian_from_edges(n, us, vs, np.ones(len(us))), check=False)


GENERATORS = {
    "grid2d": grid2d,
    "grid3d": grid3d,
    "random-regular": random_regular,
    "product-demand": product_demand,
    "barbell": barbell,
}
