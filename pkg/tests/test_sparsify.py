import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from schurchain.sddm import SddmMatrix, laplacian_from_edges, loewner_approx_check, xl_decompose
from schurchain.sparsify import SparsifyParams, effective_resistances, sparsify

from conftest import random_graph_laplacian


def complete(n, w=1.0):
    iu, ju = np.triu_indices(n, k=1)
    return SddmMatrix(laplacian_from_edges(n, iu, ju, np.full(iu.size, w)))


class TestParams:
    @pytest.mark.parametrize("eps", [0.0, -0.1, 1.5])
    def test_eps_range(self, eps):
        with pytest.raises(ValueError):
            SparsifyParams(eps=eps)

    def test_c_floor(self):
        with pytest.raises(ValueError):
            SparsifyParams(c=3.9)
        SparsifyParams(c=4)

    def test_budget(self):
        assert SparsifyParams(eps=0.5, c=8).target_nnz_per_vertex == 32


class TestSparsify:
    def test_under_budget_unchanged(self):
        m = complete(50)
        assert sparsify(m, SparsifyParams(eps=0.5, seed=1)) is m

    def test_k50_fidelity(self):
        m = complete(50)
        passes = sum(
            loewner_approx_check(sparsify(m, SparsifyParams(eps=0.5, seed=s, always_sample=True)), m, 0.5).passes
            for s in range(1, 101))
        assert passes >= 95

    def test_excess_bitwise(self, rng):
        n = 40
        lap = random_graph_laplacian(n, 0.9, rng)
        x = rng.uniform(0.1, 2.0, n)
        m = SddmMatrix(lap + sp.diags(x), check=False)
        out = sparsify(m, SparsifyParams(eps=0.9, seed=5, always_sample=True))
        assert out is not m
        assert np.array_equal(xl_decompose(out).x, xl_decompose(m).x)

    def test_sampled_edges_are_subset(self, rng):
        m = complete(30)
        out = sparsify(m, SparsifyParams(eps=1.0, c=4, seed=2, always_sample=True))
        assert not np.any((out.toarray() != 0) & (m.toarray() == 0))

    def test_deterministic(self):
        m = complete(30)
        p = SparsifyParams(eps=1.0, c=4, seed=7, always_sample=True)
        assert (sparsify(m, p).mat != sparsify(m, p).mat).nnz == 0

    def test_unbiased(self):
        rng = np.random.default_rng(3)
        m = SddmMatrix(random_graph_laplacian(20, 0.5, rng))
        acc = np.zeros((20, 20))
        for s in range(200):
            acc += sparsify(m, SparsifyParams(eps=0.5, seed=s, always_sample=True)).toarray()
        target = m.toarray()
        assert np.linalg.norm(acc / 200 - target) <= 0.02 * np.linalg.norm(target)

    def test_reduces_dense_graph(self):
        m = complete(400)
        out = sparsify(m, SparsifyParams(eps=1.0, c=4, seed=0))
        assert out.nnz < m.nnz
        assert loewner_approx_check(out, m, 1.0).passes


class TestResistances:
    def test_single_edge(self):
        lap = laplacian_from_edges(2, [0], [1], [4.0])
        np.testing.assert_allclose(effective_resistances(lap), [0.25])

    def test_path_ends(self):
        lap = laplacian_from_edges(3, [0, 1], [1, 2], [1.0, 1.0])
        np.testing.assert_allclose(effective_resistances(lap, ([0], [2])), [2.0])

    def test_foster(self):
        rng = np.random.default_rng(30)
        lap = random_graph_laplacian(30, 0.3, rng)
        u, v = sp.triu(lap, k=1).nonzero()
        w = -np.asarray(lap[u, v]).ravel()
        r = effective_resistances(lap, (u, v))
        assert abs(float(w @ r) - 29) <= 1e-9

    def test_foster_components(self):
        lap = sp.block_diag([laplacian_from_edges(3, [0, 1], [1, 2], [1.0, 2.0]),
                             laplacian_from_edges(2, [0], [1], [3.0])]).tocsr()
        r = effective_resistances(lap)
        # n - #components = 5 - 2
        np.testing.assert_allclose(r @ np.array([1.0, 2.0, 3.0]), 3.0)

    def test_cross_component_rejected(self):
        lap = sp.block_diag([laplacian_from_edges(2, [0], [1], [1.0])] * 2).tocsr()
        with pytest.raises(ValueError):
            effective_resistances(lap, ([0], [2]))

    def test_excess_ignored(self, rng):
        lap = random_graph_laplacian(15, 0.4, rng)
        shifted = lap + sp.diags(rng.uniform(0, 1, 15))
        np.testing.assert_allclose(effective_resistances(shifted), effective_resistances(lap))

    def test_projection_estimate(self):
        # large graphs use random projections; compare with the exact values on a medium ring
        from schurchain import sparsify as mod
        n = 300
        u = np.arange(n)
        v = (u + 1) % n
        lap = laplacian_from_edges(n, u, v, np.ones(n))
        exact = mod._dense_pinv_resistances(lap, u, v)
        approx = mod._projected_resistances(lap, u, v, np.ones(n), seed=0)
        assert np.median(np.abs(approx / exact - 1)) < 0.25

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 12), st.integers(0, 10_000))
    def test_rayleigh_monotone(self, n, seed):
        # adding weight never increases a resistance
        rng = np.random.default_rng(seed)
        lap = random_graph_laplacian(n, 0.5, rng)
        heavier = lap + random_graph_laplacian(n, 0.5, rng)
        assert np.all(effective_resistances(heavier, sp.triu(lap, 1).nonzero())
                      <= effective_resistances(lap) * (1 + 1e-9))
