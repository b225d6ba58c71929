"""Ramanujan graphs, spectral graph transforms and sparse product-demand approximations."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
from scipy.sparse import csgraph
from scipy.sparse.linalg import eigsh

from .rng import make_rng
from .sddm import canonical_csr, edges_of, laplacian_from_edges

LN2 = math.log(2.0)
SMALL_EXPANDER = 64
DENSE_EIG_MAX = 1500


# ---------------------------------------------------------------- graphs


@dataclass(frozen=True)
class RegularGraph:
    """Unweighted d-regular multigraph; each undirected edge listed once, a self-loop adds 2 to its degree."""

    n: int
    d: int
    u: np.ndarray
    v: np.ndarray
    left: np.ndarray | None = None

    @property
    def bipartite(self) -> bool:
        return self.left is not None

    def adjacency(self) -> sp.csr_matrix:
        rows = np.concatenate([self.u, self.v])
        cols = np.concatenate([self.v, self.u])
        a = sp.csr_matrix((np.ones(rows.size), (rows, cols)), shape=(self.n, self.n))
        a.sum_duplicates()
        return a

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def as_weighted(self) -> "WeightedGraph":
        w = np.where(self.u == self.v, 2.0, 1.0)
        return WeightedGraph(self.n, self.u, self.v, w, left=self.left).merged()


@dataclass(frozen=True)
class WeightedGraph:
    """Weighted multigraph; a self-loop of weight w adds w to the weighted degree."""

    n: int
    u: np.ndarray
    v: np.ndarray
    w: np.ndarray
    left: np.ndarray | None = None
    eps_bound: float | None = None

    def merged(self) -> "WeightedGraph":
        lo = np.minimum(self.u, self.v).astype(np.int64)
        hi = np.maximum(self.u, self.v).astype(np.int64)
        if lo.size == 0:
            return self
        key = lo * self.n + hi
        uniq, inv = np.unique(key, return_inverse=True)
        w = np.bincount(inv, weights=self.w, minlength=uniq.size)
        return WeightedGraph(self.n, uniq // self.n, uniq % self.n, w, self.left, self.eps_bound)

    def without_loops(self) -> "WeightedGraph":
        keep = self.u != self.v
        return WeightedGraph(self.n, self.u[keep], self.v[keep], self.w[keep], self.left, self.eps_bound)

    def scaled(self, s: float) -> "WeightedGraph":
        return WeightedGraph(self.n, self.u, self.v, self.w * s, self.left, self.eps_bound)

    @property
    def num_edges(self) -> int:
        return int(np.count_nonzero(self.u != self.v))

    def adjacency(self) -> sp.csr_matrix:
        loop = self.u == self.v
        rows = np.concatenate([self.u[~loop], self.v[~loop], self.u[loop]])
        cols = np.concatenate([self.v[~loop], self.u[~loop], self.u[loop]])
        vals = np.concatenate([self.w[~loop], self.w[~loop], self.w[loop]])
        a = sp.csr_matrix((vals, (rows, cols)), shape=(self.n, self.n))
        a.sum_duplicates()
        return a

    def degrees(self) -> np.ndarray:
        return np.asarray(self.adjacency().sum(axis=1)).ravel()

    def laplacian(self) -> sp.csr_matrix:
        return laplacian_from_edges(self.n, self.u, self.v, self.w)

    def max_degree(self) -> int:
        g = self.without_loops().merged()
        if g.u.size == 0:
            return 0
        return int(np.bincount(np.concatenate([g.u, g.v]), minlength=self.n).max())


def product_demand_graph(d) -> WeightedGraph:
    """Complete graph with w_ij = d_i d_j."""
    d = np.asarray(d, dtype=float)
    iu, ju = np.triu_indices(d.size, k=1)
    return WeightedGraph(d.size, iu.astype(np.int64), ju.astype(np.int64), d[iu] * d[ju])


def bipartite_demand_graph(da, db) -> WeightedGraph:
    """Complete bipartite graph between A = 0..|A|-1 and B = |A|..; w_ab = d_a d_b."""
    da = np.asarray(da, dtype=float)
    db = np.asarray(db, dtype=float)
    ia, ib = np.meshgrid(np.arange(da.size), np.arange(db.size), indexing="ij")
    left = np.zeros(da.size + db.size, dtype=bool)
    left[: da.size] = True
    return WeightedGraph(
        da.size + db.size, ia.ravel().astype(np.int64), (ib.ravel() + da.size).astype(np.int64),
        np.outer(da, db).ravel(), left=left)


# ---------------------------------------------------------------- number theory


def is_prime(n: int) -> bool:
    if n < 2:
        return False
    if n % 2 == 0:
        return n == 2
    f = 3
    while f * f <= n:
        if n % f == 0:
            return False
        f += 2
    return True


def next_prime_1mod4(n: int) -> int:
    """Least prime q >= n with q = 1 (mod 4)."""
    if n < 2:
        raise ValueError("n must be at least 2")
    q = max(n, 5)
    q += (1 - q) % 4
    while not is_prime(q):
        q += 4
    return q


def sqrt_minus_one(q: int) -> int:
    for g in range(2, q):
        r = pow(g, (q - 1) // 4, q)
        if r * r % q == q - 1:
            return r
    raise ValueError(f"no square root of -1 modulo {q}")


def is_quadratic_residue(a: int, q: int) -> bool:
    return pow(a % q, (q - 1) // 2, q) == 1


def four_square_solutions(p: int) -> list:
    """All (a0,a1,a2,a3) with a0 > 0 odd, a1..a3 even and sum of squares p."""
    out = []
    r = math.isqrt(p)
    evens = [a for a in range(-r, r + 1) if a % 2 == 0]
    for a0 in range(1, r + 1, 2):
        rest0 = p - a0 * a0
        for a1 in evens:
            rest1 = rest0 - a1 * a1
            if rest1 < 0:
                continue
            for a2 in evens:
                rest2 = rest1 - a2 * a2
                if rest2 < 0:
                    continue
                a3 = math.isqrt(rest2)
                if a3 * a3 != rest2 or a3 % 2:
                    continue
                out.append((a0, a1, a2, a3))
                if a3:
                    out.append((a0, a1, a2, -a3))
    return sorted(set(out))


# ---------------------------------------------------------------- LPS construction


def _canonical(mats: np.ndarray, q: int, projective_sign_only: bool, inverses: np.ndarray) -> np.ndarray:
    nz = mats != 0
    first = np.argmax(nz, axis=1)
    lead = mats[np.arange(mats.shape[0]), first]
    if projective_sign_only:
        flip = lead > (q - 1) // 2
        return np.where(flip[:, None], (q - mats) % q, mats)
    return mats * inverses[lead][:, None] % q


def _mul(mats: np.ndarray, g, q: int) -> np.ndarray:
    a, b, c, d = mats[:, 0], mats[:, 1], mats[:, 2], mats[:, 3]
    e, f, h, k = g
    return np.stack([(a * e + b * h) % q, (a * f + b * k) % q, (c * e + d * h) % q, (c * f + d * k) % q], axis=1)


def _group_order(q: int, residue: bool) -> int:
    full = q * (q * q - 1)
    return full // 2 if residue else full


@lru_cache(maxsize=32)
def _lps_cached(p: int, q: int) -> RegularGraph:
    if p == q or not (is_prime(p) and is_prime(q)) or p % 4 != 1 or q % 4 != 1:
        raise ValueError("p and q must be distinct primes congruent to 1 mod 4")
    if q * q <= 4 * p:
        raise ValueError("q must exceed 2 sqrt(p)")
    sols = four_square_solutions(p)
    if len(sols) != p + 1:
        raise RuntimeError(f"expected {p + 1} generators, found {len(sols)}")
    i = sqrt_minus_one(q)
    residue = is_quadratic_residue(p, q)
    gens = np.array([[(a0 + i * a1) % q, (a2 + i * a3) % q, (-a2 + i * a3) % q, (a0 - i * a1) % q]
                     for a0, a1, a2, a3 in sols], dtype=np.int64)
    inverses = np.zeros(q, dtype=np.int64)
    inverses[1:] = [pow(x, q - 2, q) for x in range(1, q)]
    if residue:
        root = next(s for s in range(1, q) if s * s % q == p % q)
        gens = gens * inverses[root] % q
    gens = _canonical(gens, q, residue, inverses)

    weights = np.array([q ** 3, q ** 2, q, 1], dtype=np.int64)
    ident = np.array([[1, 0, 0, 1]], dtype=np.int64)
    seen_keys = [ident @ weights]
    elems = [ident]
    frontier = ident
    known = set(seen_keys[0].tolist())
    while frontier.shape[0]:
        nxt = np.concatenate([_canonical(_mul(frontier, g, q), q, residue, inverses) for g in gens])
        keys = nxt @ weights
        keys, first = np.unique(keys, return_index=True)
        fresh = np.array([k not in known for k in keys.tolist()], dtype=bool)
        frontier = nxt[first[fresh]]
        known.update(keys[fresh].tolist())
        elems.append(frontier)
    elems = np.concatenate(elems)
    keys = elems @ weights
    order = np.argsort(keys)
    elems, keys = elems[order], keys[order]
    n = elems.shape[0]
    if n != _group_order(q, residue):
        raise RuntimeError(f"group closure has {n} elements, expected {_group_order(q, residue)}")

    src, dst = [], []
    for g in gens:
        nb = _canonical(_mul(elems, g, q), q, residue, inverses) @ weights
        idx = np.searchsorted(keys, nb)
        src.append(np.arange(n))
        dst.append(idx)
    src = np.concatenate(src)
    dst = np.concatenate(dst)
    keep = src < dst
    loops = src == dst
    u = np.concatenate([src[keep], src[loops]])
    v = np.concatenate([dst[keep], dst[loops]])
    left = None
    if not residue:
        det = (elems[:, 0] * elems[:, 3] - elems[:, 1] * elems[:, 2]) % q
        left = np.array([is_quadratic_residue(int(x), q) for x in det], dtype=bool)
    for arr in (u, v) + ((left,) if left is not None else ()):
        arr.flags.writeable = False
    return RegularGraph(n, p + 1, u.astype(np.int64), v.astype(np.int64), left)


def lps_ramanujan(p: int, q: int) -> RegularGraph:
    """Cayley graph of PSL(2, q) (p a square mod q) or PGL(2, q) (bipartite otherwise), degree p + 1."""
    return _lps_cached(int(p), int(q))


def nontrivial_spectral_radius(g, bipartite: bool | None = None) -> float:
    """Largest |eigenvalue| of the adjacency matrix after removing the trivial ones."""
    a = g.adjacency()
    n = a.shape[0]
    bip = g.left is not None if bipartite is None else bipartite
    if n <= DENSE_EIG_MAX:
        vals = np.linalg.eigvalsh(a.toarray())
        inner = vals[1:-1] if bip else vals[:-1]
        return float(np.abs(inner).max()) if inner.size else 0.0
    k = 4
    top = eigsh(a, k=k, which="LA", return_eigenvectors=False, tol=1e-10)
    bot = eigsh(a, k=k, which="SA", return_eigenvectors=False, tol=1e-10)
    top = np.sort(top)[::-1]
    bot = np.sort(bot)
    cand = [top[1]]
    cand.append(abs(bot[1]) if bip else abs(bot[0]))
    return float(max(cand))


# ---------------------------------------------------------------- transforms


def double_cover(g: RegularGraph) -> RegularGraph:
    """Bipartite lift with adjacency [[0, A], [A, 0]]."""
    if g.bipartite:
        raise ValueError("input is already bipartite")
    n = g.n
    loop = g.u == g.v
    u = np.concatenate([g.u[~loop], g.v[~loop], g.u[loop], g.u[loop]])
    v = np.concatenate([g.v[~loop] + n, g.u[~loop] + n, g.u[loop] + n, g.u[loop] + n])
    left = np.zeros(2 * n, dtype=bool)
    left[:n] = True
    return RegularGraph(2 * n, g.d, u, v, left)


def collapse(g: RegularGraph, pi) -> WeightedGraph:
    """Identify each right vertex v with the left vertex pi[v]; the result lives on the left vertex ids.

    ``pi`` maps right-side positions (in increasing vertex order) to left-side
    positions (in increasing vertex order).
    """
    if not g.bipartite:
        raise ValueError("collapse needs a bipartite graph")
    left_ids = np.flatnonzero(g.left)
    right_ids = np.flatnonzero(~g.left)
    if left_ids.size != right_ids.size:
        raise ValueError("sides differ in size")
    pi = np.asarray(pi, dtype=np.int64)
    if pi.shape != (right_ids.size,) or not np.array_equal(np.sort(pi), np.arange(right_ids.size)):
        raise ValueError("pi is not a bijection between the sides")
    pos = np.empty(g.n, dtype=np.int64)
    pos[left_ids] = np.arange(left_ids.size)
    pos[right_ids] = pi[np.arange(right_ids.size)]
    a_left = g.left[g.u]
    lu = np.where(a_left, g.u, g.v)
    rv = np.where(a_left, g.v, g.u)
    a = pos[lu]
    b = pos[rv]
    w = np.where(a == b, 2.0, 1.0)
    return WeightedGraph(left_ids.size, a, b, w).merged()


# ---------------------------------------------------------------- unweighted expanders


def lps_epsilon(p: int) -> float:
    """Approximation quality (2 ln 2) lambda / d certified by the Ramanujan bound."""
    return 2 * LN2 * 2 * math.sqrt(p) / (p + 1)


def _primes_1mod4(lo: int, hi: int):
    q = next_prime_1mod4(max(lo, 2))
    while q <= hi:
        yield q
        q = next_prime_1mod4(q + 1)


def _choose_lps(n: int, eps: float, bipartite: bool, max_q: int = 61):
    """Smallest-degree (p, q, construction) whose side size lies in [n, 8n]."""
    best = None
    for q in _primes_1mod4(5, max_q):
        size = q * (q * q - 1) // 2
        if size < n:
            continue
        if size > 8 * n:
            break
        for p in _primes_1mod4(5, (q * q - 1) // 4):
            if p == q or lps_epsilon(p) > eps or 2 * math.sqrt(p) > (p + 1) / 2:
                continue
            residue = is_quadratic_residue(p, q)
            if bipartite:
                how = "double-cover" if residue else "direct"
                edges = size * (p + 1)
            else:
                how = "direct" if residue else "collapse"
                edges = size * (p + 1) // (2 if residue else 1)
            if best is None or edges < best[0]:
                best = (edges, p, q, how)
            break
    return best


def _random_regular(n: int, d: int, rng, bipartite: bool) -> RegularGraph:
    if bipartite:
        u = np.concatenate([np.arange(n)] * d)
        v = np.concatenate([rng.permutation(n) for _ in range(d)]) + n
        left = np.zeros(2 * n, dtype=bool)
        left[:n] = True
        return RegularGraph(2 * n, d, u.astype(np.int64), v.astype(np.int64), left)
    half = d // 2
    u = np.concatenate([np.arange(n)] * half)
    v = np.concatenate([rng.permutation(n) for _ in range(half)])
    return RegularGraph(n, 2 * half, u.astype(np.int64), v.astype(np.int64))


def certified_random_regular(n: int, eps: float, seed: int = 0, bipartite: bool = False, max_tries: int = 16):
    """Random regular multigraph on n vertices (per side) whose measured lambda meets the eps bound.

    Returns (graph, lambda) or None when no sparse certificate was found.
    """
    d = 2 if bipartite else 4
    while 2 * LN2 * 2 * math.sqrt(max(d - 1, 1)) / d > 0.9 * eps:
        d += 1 if bipartite else 2
    while d < (n if bipartite else n - 1):
        for attempt in range(max_tries):
            g = _random_regular(n, d, make_rng(seed, n, d, attempt, int(bipartite)), bipartite)
            lam = nontrivial_spectral_radius(g)
            if lam <= d / 2 and 2 * LN2 * lam / d <= eps:
                return g, lam
        d += 1 if bipartite else 2
    return None


def _complete(n: int) -> WeightedGraph:
    iu, ju = np.triu_indices(n, k=1)
    return WeightedGraph(n, iu.astype(np.int64), ju.astype(np.int64), np.ones(iu.size), eps_bound=0.0)


def _complete_bipartite(n: int) -> WeightedGraph:
    g = bipartite_demand_graph(np.ones(n), np.ones(n))
    return WeightedGraph(g.n, g.u, g.v, g.w, g.left, 0.0)


def _sides_first(g: RegularGraph) -> RegularGraph:
    order = np.concatenate([np.flatnonzero(g.left), np.flatnonzero(~g.left)])
    pos = np.empty(g.n, dtype=np.int64)
    pos[order] = np.arange(g.n)
    left = np.zeros(g.n, dtype=bool)
    left[: g.n // 2] = True
    return RegularGraph(g.n, g.d, pos[g.u], pos[g.v], left)


@lru_cache(maxsize=128)
def _expander_cached(n: int, eps: float, seed: int, bipartite: bool):
    choice = _choose_lps(n, eps, bipartite)
    if choice is not None:
        _, p, q, how = choice
        g = lps_ramanujan(p, q)
        if how == "direct" and not bipartite:
            size, deg, lam_ratio = g.n, g.d, 2 * math.sqrt(p) / (p + 1)
            wg = g.as_weighted()
        elif how == "collapse":
            half = g.n // 2
            wg = collapse(g, np.arange(half))
            size, deg, lam_ratio = half, 2 * g.d, 2 * math.sqrt(p) / (p + 1)
        else:
            bg = g if how == "direct" else double_cover(g)
            bg = _sides_first(bg)
            wg = bg.as_weighted()
            size, deg, lam_ratio = bg.n // 2, bg.d, 2 * math.sqrt(p) / (p + 1)
        eps_bound = 2 * LN2 * lam_ratio
    else:
        found = certified_random_regular(n, eps, seed, bipartite)
        if found is None:
            wg = _complete_bipartite(n) if bipartite else _complete(n)
            return n, wg
        g, lam = found
        size, deg = n, g.d
        wg = g.as_weighted()
        eps_bound = 2 * LN2 * lam / deg
    wg = wg.scaled(size / deg)
    return size, WeightedGraph(wg.n, wg.u, wg.v, wg.w, wg.left, eps_bound)


def expander_complete_approx(n: int, eps: float, seed: int = 0) -> tuple:
    """(n', H) with n <= n' <= 8n and L_H an eps-approximation of the complete graph K_{n'}."""
    if n < 2:
        raise ValueError("n must be at least 2")
    if eps <= n ** (-1.0 / 6.0):
        warnings.warn("eps below n^(-1/6); the explicit-construction guarantee is not claimed", stacklevel=2)
    return _expander_cached(int(n), float(eps), int(seed), False)


def expander_bipartite_approx(n: int, eps: float, seed: int = 0) -> tuple:
    """(n', H) with sides [0, n') and [n', 2n'), L_H an eps-approximation of K_{n',n'}."""
    if n < 1:
        raise ValueError("n must be positive")
    return _expander_cached(int(n), float(eps), int(seed), True)


def expander_edge_estimate(n: int, eps: float) -> float:
    """Rough edge count of the expander route for a demand graph on n vertices."""
    size = 2 * n / eps ** 2
    deg = (4 * LN2 / eps) ** 2
    return size * (deg / 2 + 1)


# ---------------------------------------------------------------- weighted expanders


def _split(d: np.ndarray, t: float, keep: int):
    full = np.floor(d / t).astype(np.int64)
    owners_full = np.repeat(np.arange(d.size), full)
    rem = d - full * t
    has_rem = rem > 1e-12 * d
    h_owner = owners_full[:keep]
    l_owner = np.concatenate([owners_full[keep:], np.flatnonzero(has_rem)])
    l_dem = np.concatenate([np.full(owners_full.size - keep, t), rem[has_rem]])
    return h_owner, l_owner, l_dem


def _stars(l_owner, l_dem, h_owner_other, t_other: float, h_offset: int = 0):
    """Each light piece l joins a round-robin group V_l of heavy pieces with weight (|H|/|V_l|) d_l t."""
    k = l_owner.size
    nh = h_owner_other.size
    if k == 0:
        return (np.zeros(0, np.int64),) * 2 + (np.zeros(0),)
    group = np.arange(nh) % k
    sizes = np.bincount(group, minlength=k)
    us = l_owner[group]
    vs = h_owner_other + h_offset
    ws = (nh / sizes[group]) * l_dem[group] * t_other
    return us, vs, ws


def _use_exact(n_vertices: int, n_hat: int, eps: float, prefer_exact: bool) -> bool:
    if n_hat < SMALL_EXPANDER:
        return True
    return prefer_exact and n_vertices * (n_vertices - 1) / 2 <= expander_edge_estimate(n_vertices, eps)


def weighted_expander(d, eps: float, seed: int = 0, prefer_exact: bool = True) -> WeightedGraph:
    """Sparse approximation of the product demand graph of d."""
    d = np.asarray(d, dtype=float)
    n = d.size
    if np.any(d <= 0):
        raise ValueError("demands must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    n_hat = math.floor(2 * n / eps ** 2) + 1
    if n <= 1 or _use_exact(n, n_hat, eps, prefer_exact):
        return product_demand_graph(d)
    size, h = expander_complete_approx(n_hat, eps, seed)
    t = d.sum() / (size + n)
    h_owner, l_owner, l_dem = _split(d, t, size)
    us = [h_owner[h.u]]
    vs = [h_owner[h.v]]
    ws = [h.w * t * t]
    su, sv, sw = _stars(l_owner, l_dem, h_owner, t)
    us.append(su)
    vs.append(sv)
    ws.append(sw)
    g = WeightedGraph(n, np.concatenate(us), np.concatenate(vs), np.concatenate(ws))
    return g.without_loops().merged()


def weighted_bipartite_expander(da, db, eps: float, seed: int = 0, prefer_exact: bool = True) -> WeightedGraph:
    """Sparse approximation of the bipartite product demand graph; A is 0..|A|-1, B follows."""
    da = np.asarray(da, dtype=float)
    db = np.asarray(db, dtype=float)
    if np.any(da <= 0) or np.any(db <= 0):
        raise ValueError("demands must be positive")
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    na, nb = da.size, db.size
    side = max(na, nb)
    n_hat = math.floor(2 * side / eps ** 2) + 1
    if na * nb <= 1 or n_hat < SMALL_EXPANDER or (
            prefer_exact and na * nb <= expander_edge_estimate(side, eps)):
        return bipartite_demand_graph(da, db)
    size, h = expander_bipartite_approx(n_hat, eps, seed)
    ta = da.sum() / (size + na)
    tb = db.sum() / (size + nb)
    ha, la, lda = _split(da, ta, size)
    hb, lb, ldb = _split(db, tb, size)
    hl = h.left[h.u]
    hu = np.where(hl, h.u, h.v)
    hv = np.where(hl, h.v, h.u) - size
    us = [ha[hu]]
    vs = [hb[hv] + na]
    ws = [h.w * ta * tb]
    su, sv, sw = _stars(la, lda, hb, tb, h_offset=na)
    us.append(su)
    vs.append(sv)
    ws.append(sw)
    su, sv, sw = _stars(lb, ldb, ha, ta)
    us.append(su + na)
    vs.append(sv)
    ws.append(sw)
    left = np.zeros(na + nb, dtype=bool)
    left[:na] = True
    g = WeightedGraph(na + nb, np.concatenate(us), np.concatenate(vs), np.concatenate(ws), left=left)
    return g.merged()


# ---------------------------------------------------------------- degree reduction


@dataclass(frozen=True)
class DegreeReduction:
    laplacian: sp.csr_matrix
    extra: np.ndarray
    clone_of: np.ndarray
    clone_weight: np.ndarray


def _clone_links(count: int, weight: float, eps: float, seed: int, t: int):
    """Edges joining `count` clones, approximating a complete graph of edge weight `weight`."""
    if count <= t:
        iu, ju = np.triu_indices(count, k=1)
        return iu, ju, np.full(iu.size, weight)
    found = certified_random_regular(count, eps, seed)
    if found is None:
        iu, ju = np.triu_indices(count, k=1)
        return iu, ju, np.full(iu.size, weight)
    g, _ = found
    wg = g.as_weighted().without_loops()
    return wg.u, wg.v, wg.w * weight * count / g.d


def reduce_degree(g, eps: float, t: int, seed: int = 0, sparsify_first: bool = True) -> DegreeReduction:
    """Split high-degree vertices so that eliminating the added vertices approximately recovers g."""
    from .sparsify import SparsifyParams, sparsify

    if eps <= 0:
        raise ValueError("eps must be positive")
    if t <= 1 / eps ** 2:
        raise ValueError("t must exceed 1/eps^2")
    if t <= eps ** -6:
        warnings.warn("t <= eps^-6: outside the range covered by the explicit-construction remark", stacklevel=2)
    lap = canonical_csr(g)
    n = lap.shape[0]
    delta = eps / 3
    if sparsify_first:
        lap = sparsify(lap, SparsifyParams(eps=delta, seed=seed)).mat
    u, v, w = edges_of(lap)
    m = u.size
    ends = np.concatenate([u, v])
    edge_id = np.concatenate([np.arange(m), np.arange(m)])
    order = np.lexsort((edge_id, ends))
    ends_sorted = ends[order]
    deg = np.bincount(ends, minlength=n)
    start = np.concatenate([[0], np.cumsum(deg)])
    rank = np.arange(ends_sorted.size) - start[ends_sorted]
    chunk = rank // t
    n_clones = np.maximum(1, -(-deg // t))
    extra_start = n + np.concatenate([[0], np.cumsum(n_clones - 1)])
    new_id = np.where(chunk == 0, ends_sorted, extra_start[ends_sorted] + chunk - 1)
    mapped = np.empty_like(ends)
    mapped[order] = new_id
    nu, nv = mapped[:m], mapped[m:]
    total = int(extra_start[-1])
    clone_of = np.concatenate([np.arange(n), np.repeat(np.arange(n), n_clones - 1)])
    strength = np.bincount(ends, weights=np.concatenate([w, w]), minlength=n)
    link_w = strength / delta
    us, vs, ws = [nu], [nv], [w]
    for x in np.flatnonzero(n_clones > 1):
        ids = np.concatenate([[x], extra_start[x] + np.arange(n_clones[x] - 1)])
        a, b, lw = _clone_links(int(n_clones[x]), float(link_w[x]), delta, seed, t)
        us.append(ids[a])
        vs.append(ids[b])
        ws.append(lw)
    out = laplacian_from_edges(total, np.concatenate(us), np.concatenate(vs), np.concatenate(ws))
    return DegreeReduction(out, np.arange(n, total), clone_of, link_w)


def connected(g: WeightedGraph) -> bool:
    ncomp, _ = csgraph.connected_components(g.adjacency(), directed=False)
    return ncomp == 1
