import sys
import numpy as np
import pytest
import scipy.linalg as la
import scipy.sparse as sp

from schurchain.sddm import SddmMatrix, laplacian_from_edges


def random_graph_laplacian(n, density, rng, weights=(0.1, 2.0)):
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < density
    # a spanning path keeps things connected
    path_u, path_v = np.arange(n - 1), np.arange(1, n)
    u = np.concatenate([iu[keep], path_u])
    v = np.concatenate([ju[keep], path_v])
    w = rng.uniform(*weights, u.size)
    return laplacian_from_edges(n, u, v, w)


def random_sddm(n, rng, density=0.3, excess=(0.0, 1.0)):
    lap = random_graph_laplacian(n, density, rng)
    x = rng.uniform(*excess, n)
    x[rng.integers(n)] += 0.5
    return SddmMatrix(lap + sp.diags(x), check=False)


def random_alpha_block(n, alpha, rng, density=0.2, tight=True):
    """M = X + L with X_ii >= alpha * (weighted degree)_i, some rows tight."""
    lap = random_graph_laplacian(n, density, rng)
    deg = lap.diagonal()
    x = alpha * deg * (1 + rng.uniform(0, 1, n))
    if tight:
        pick = rng.random(n) < 0.3
        x[pick] = alpha * deg[pick]
    return SddmMatrix(lap + sp.diags(x), check=False)


def dense_schur(a, f):
    a = np.asarray(a.toarray() if hasattr(a, "toarray") else a, dtype=float)
    n = a.shape[0]
    c = np.setdiff1d(np.arange(n), f)
    return a[np.ix_(c, c)] - a[np.ix_(c, f)] @ np.linalg.solve(a[np.ix_(f, f)], a[np.ix_(f, c)])


def brute_eps(a, b):
    """ln max(lambda_max, 1/lambda_min) of the pencil (A, B), on the range of B."""
    a = np.asarray(a.toarray() if hasattr(a, "toarray") else a, dtype=float)
    b = np.asarray(b.toarray() if hasattr(b, "toarray") else b, dtype=float)
    w, v = np.linalg.eigh(b)
    keep = w > 1e-10 * max(w.max(), 1)
    half = v[:, keep] / np.sqrt(w[keep])
    lam = np.linalg.eigvalsh(half.T @ a @ half)
    return float(np.log(max(lam.max(), 1 / lam.min())))


def grid(k, ridge=0.0):
    from schurchain.generators import grid2d
    return grid2d(k, ridge)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for num in sorted(results):
            terminalreporter.write_line(results[num])
