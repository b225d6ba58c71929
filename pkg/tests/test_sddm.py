import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from schurchain.sddm import (IndexPartition, InvalidMatrixError, SddmMatrix, blocks, exact_schur,
                             generalized_extremes, laplacian_from_edges, loewner_approx_check, matvec,
                             strong_dominance, validate_sddm, xl_decompose)

from conftest import brute_eps, dense_schur, random_graph_laplacian, random_sddm

P3 = np.array([[1.0, -1, 0], [-1, 2, -1], [0, -1, 1]])


class TestValidate:
    def test_identity_is_sddm(self):
        res = validate_sddm(np.eye(3))
        assert res.ok and res.kind == "sddm"

    def test_path_laplacian(self):
        res = validate_sddm(P3)
        assert res.ok and res.kind == "laplacian"

    def test_positive_offdiagonal_message(self):
        a = np.eye(3) * 3
        a[0, 1] = a[1, 0] = 1.0
        res = validate_sddm(a)
        assert not res.ok
        assert "positive off-diagonal at (0,1)" in res.error

    def test_asymmetry(self):
        a = np.array([[2.0, -1], [0, 2]])
        res = validate_sddm(a)
        assert not res.ok and "symmetr" in res.error

    def test_negative_row_sum(self):
        a = np.array([[1.0, -2], [-2, 3]])
        res = validate_sddm(a)
        assert not res.ok and "negative row sum at row 0" in res.error

    def test_disconnected_laplacian_reports_components(self):
        lap = laplacian_from_edges(4, [0, 2], [1, 3], [1.0, 1.0])
        res = validate_sddm(lap)
        assert not res.ok and "disconnected" in res.error
        assert validate_sddm(lap, allow_disconnected=True).ok

    def test_constructor_raises(self):
        with pytest.raises(InvalidMatrixError):
            SddmMatrix(np.array([[1.0, 1], [1, 1]]))

    def test_duplicates_are_summed(self):
        coo = sp.coo_matrix(([1.0, 1.0, -1, -1, 2], ([0, 0, 0, 1, 1], [0, 0, 1, 0, 1])), shape=(2, 2))
        m = SddmMatrix(coo)
        assert m.toarray()[0, 0] == 2.0


class TestXl:
    def test_diagonal(self):
        xl = xl_decompose(SddmMatrix(np.diag([2.0, 2.0])))
        assert np.array_equal(xl.x, [2, 2])
        assert not np.any(xl.laplacian.toarray())

    def test_two_by_two(self):
        xl = xl_decompose(SddmMatrix(np.array([[2.0, -1], [-1, 2]])))
        assert np.array_equal(xl.x, [1, 1])
        assert np.array_equal(xl.laplacian.toarray(), [[1, -1], [-1, 1]])

    def test_bit_exact_recomposition(self, rng):
        m = random_sddm(50, rng)
        xl = xl_decompose(m)
        rebuilt = (xl.laplacian.mat + sp.diags(xl.x)).tocsr()
        diff = rebuilt - m.mat
        assert diff.count_nonzero() == 0
        assert np.abs(np.asarray(xl.laplacian.mat.sum(axis=1))).max() < 1e-13


class TestMatvec:
    def test_identity(self):
        v = np.array([1.0, 2, 3])
        assert np.array_equal(matvec(SddmMatrix(np.eye(3)), v), v)

    def test_laplacian_kills_ones(self):
        assert np.array_equal(matvec(SddmMatrix(P3), np.ones(3)), np.zeros(3))

    def test_p3_basis(self):
        assert np.array_equal(matvec(SddmMatrix(P3), [1.0, 0, 0]), [1, -1, 0])

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(SddmMatrix(P3), np.ones(4))


class TestExactSchur:
    def test_block_diagonal(self):
        a = sp.block_diag([np.array([[2.0, -1], [-1, 2]]), np.array([[3.0, -1], [-1, 3]])]).tocsr()
        out = exact_schur(SddmMatrix(a), [0, 1])
        assert np.array_equal(out.toarray(), [[3, -1], [-1, 3]])

    def test_tridiagonal_example(self):
        m = np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
        out = exact_schur(SddmMatrix(m), [1])
        np.testing.assert_allclose(out.toarray(), [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)

    @pytest.mark.parametrize("nf", [5, 90])
    def test_matches_dense_oracle(self, rng, nf):
        m = random_sddm(140, rng, density=0.05)
        f = np.sort(rng.choice(140, nf, replace=False))
        np.testing.assert_allclose(exact_schur(m, f).toarray(), dense_schur(m, f), atol=1e-10)

    def test_singular_laplacian_component(self):
        lap = laplacian_from_edges(4, [0, 2], [1, 3], [1.0, 1.0])
        with pytest.raises(np.linalg.LinAlgError):
            exact_schur(SddmMatrix(lap, allow_disconnected=True), [0, 1])

    def test_laplacian_stays_laplacian(self, rng):
        lap = SddmMatrix(random_graph_laplacian(30, 0.2, rng))
        out = exact_schur(lap, np.arange(10))
        assert out.is_laplacian

    @settings(max_examples=40, deadline=None)
    @given(st.integers(4, 30), st.integers(0, 2 ** 31 - 1), st.floats(0.05, 0.9))
    def test_output_is_sddm_and_rowsums_grow(self, n, seed, frac):
        r = np.random.default_rng(seed)
        m = random_sddm(n, r)
        f = np.sort(r.choice(n, max(1, min(n - 1, int(frac * n))), replace=False))
        c = np.setdiff1d(np.arange(n), f)
        out = exact_schur(m, f)
        assert validate_sddm(out.mat, tol=1e-9).ok
        inherited = np.asarray(m.mat.sum(axis=1)).ravel()[c]
        assert np.all(out.row_sums() >= inherited - 1e-9)

    def test_schur_monotone(self, rng):
        m = random_sddm(25, rng)
        extra = laplacian_from_edges(25, [0, 3, 7], [5, 9, 20], [0.7, 1.1, 0.3])
        bigger = SddmMatrix(m.mat + extra)
        f = np.arange(0, 25, 3)
        gap = exact_schur(bigger, f).toarray() - exact_schur(m, f).toarray()
        assert np.linalg.eigvalsh(gap).min() >= -1e-9

    def test_block_inverse(self, rng):
        m = random_sddm(30, rng).toarray()
        f, c = np.arange(0, 30, 2), np.arange(1, 30, 2)
        mff, mfc, mcf = m[np.ix_(f, f)], m[np.ix_(f, c)], m[np.ix_(c, f)]
        sc_inv = np.linalg.inv(dense_schur(m, f))
        mff_inv = np.linalg.inv(mff)
        lower = np.block([[np.eye(15), np.zeros((15, 15))], [-mcf @ mff_inv, np.eye(15)]])
        mid = np.block([[mff_inv, np.zeros((15, 15))], [np.zeros((15, 15)), sc_inv]])
        inv = lower.T @ mid @ lower
        perm = np.concatenate([f, c])
        expected = np.linalg.inv(m)[np.ix_(perm, perm)]
        assert np.linalg.norm(inv - expected) <= 1e-9 * np.linalg.norm(expected)


class TestLoewner:
    def test_equal(self, rng):
        m = random_sddm(20, rng)
        rep = loewner_approx_check(m, m, 0.0)
        assert rep.passes and abs(rep.epsilon_achieved) < 1e-12

    def test_scaling(self, rng):
        m = random_sddm(20, rng)
        scaled = SddmMatrix(m.mat * np.exp(0.3), check=False)
        assert loewner_approx_check(scaled, m, 0.3 + 1e-9).passes
        assert not loewner_approx_check(scaled, m, 0.29).passes

    def test_random_pair_matches_brute_force(self, rng):
        a, b = random_sddm(40, rng), random_sddm(40, rng)
        rep = loewner_approx_check(a, b, 1.0)
        assert abs(rep.epsilon_achieved - brute_eps(a, b)) <= 1e-8

    def test_laplacians_on_common_range(self, rng):
        lap = random_graph_laplacian(30, 0.2, rng)
        rep = loewner_approx_check(SddmMatrix(lap * 1.1, check=False), SddmMatrix(lap), 0.1)
        assert rep.passes
        np.testing.assert_allclose([rep.lower, rep.upper], [1.1, 1.1], rtol=1e-9)

    def test_null_space_mismatch(self, rng):
        lap = random_graph_laplacian(10, 0.3, rng).toarray()
        other = np.diag(np.r_[np.ones(9), 0.0])
        with pytest.raises(ValueError):
            generalized_extremes(lap, other)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            matvec(SddmMatrix(P3), np.ones(4))


class TestExactSchur:
    def test_block_diagonal(self):
        a = sp.block_diag([np.array([[2.0, -1], [-1, 2]]), np.array([[3.0, -1], [-1, 3]])]).tocsr()
        out = exact_schur(SddmMatrix(a), [0, 1])
        assert np.array_equal(out.toarray(), [[3, -1], [-1, 3]])

    def test_tridiagonal_example(self):
        m = np.array([[2.0, -1, 0], [-1, 2, -1], [0, -1, 2]])
        out = exact_schur(SddmMatrix(m), [1])
        np.testing.assert_allclose(out.toarray(), [[1.5, -0.5], [-0.5, 1.5]], atol=1e-15)

    @pytest.mark.parametrize("nf", [5, 90])
    def test_matches_dense_oracle(self, rng, nf):
        m = random_sddm(140, rng, density=0.05)
        f = np.sort(rng.choice(140, nf, replace=False))
        np.testing.assert_allclose(exact_schur(m, f).toarray(), dense_schur(m, f), atol=1e-10)

    def test_singular_laplacian_component(self):
        lap = laplacian_from_edges(4, [0, 2], [1, 3], [1.0, 1.0])
        with pytest.raises(np.linalg.LinAlgError):
            exact_schur(SddmMatrix(lap, allow_disconnected=True), [0, 1])

    def test_laplacian_stays_laplacian(self, rng):
        lap = SddmMatrix(random_graph_laplacian(30, 0.2, rng))
        out = exact_schur(lap, np.arange(10))
        assert out.is_laplacian

    @settings(max_examples=40, deadline=None)
    @given(st.integers(4, 30), st.integers(0, 2 ** 31 - 1), st.floats(0.05, 0.9))
    def test_output_is_sddm_and_rowsums_grow(self, n, seed, frac):
        r = np.random.default_rng(seed)
        m = random_sddm(n, r)
        f = np.sort(r.choice(n, max(1, min(n - 1, int(frac * n))), replace=False))
        c = np.setdiff1d(np.arange(n), f)
        out = exact_schur(m, f)
        assert validate_sddm(out.mat, tol=1e-9).ok
        inherited = np.asarray(m.mat.sum(axis=1)).ravel()[c]
        assert np.all(out.row_sums() >= inherited - 1e-9)

    def test_schur_monotone(self, rng):
        m = random_sddm(25, rng)
        extra = laplacian_from_edges(25, [0, 3, 7], [5, 9, 20], [0.7, 1.1, 0.3])
        bigger = SddmMatrix(m.mat + extra)
        f = np.arange(0, 25, 3)
        gap = exact_schur(bigger, f).toarray() - exact_schur(m, f).toarray()
        assert np.linalg.eigvalsh(gap).min() >= -1e-9

    def test_block_inverse(self, rng):
        m = random_sddm(30, rng).toarray()
        f, c = np.arange(0, 30, 2), np.arange(1, 30, 2)
        mff, mfc, mcf = m[np.ix_(f, f)], m[np.ix_(f, c)], m[np.ix_(c, f)]
        sc_inv = np.linalg.inv(dense_schur(m, f))
        mff_inv = np.linalg.inv(mff)
        lower = np.block([[np.eye(15), np.zeros((15, 15))], [-mcf @ mff_inv, np.eye(15)]])
        mid = np.block([[mff_inv, np.zeros((15, 15))], [np.zeros((15, 15)), sc_inv]])
        inv = lower.T @ mid @ lower
        perm = np.concatenate([f, c])
        expected = np.linalg.inv(m)[np.ix_(perm, perm)]
        assert np.linalg.norm(inv - expected) <= 1e-9 * np.linalg.norm(expected)


class TestLoewner:
    def test_equal(self, rng):
        m = random_sddm(20, rng)
        rep = loewner_approx_check(m, m, 0.0)
        assert rep.passes and abs(rep.epsilon_achieved) < 1e-12

    def test_scaling(self, rng):
        m = random_sddm(20, rng)
        scaled = SddmMatrix(m.mat * np.exp(0.3), check=False)
        assert loewner_approx_check(scaled, m, 0.3 + 1e-9).passes
        assert not loewner_approx_check(scaled, m, 0.29).passes

    def test_random_pair_matches_brute_force(self, rng):
        a, b = random_sddm(40, rng), random_sddm(40, rng)
        rep = loewner_approx_check(a, b, 1.0)
        assert abs(rep.epsilon_achieved - brute_eps(a, b)) <= 1e-8

    def test_laplacians_on_common_range(self, rng):
        lap = random_graph_laplacian(30, 0.2, rng)
        rep = loewner_approx_check(SddmMatrix(lap * 1.1, check=False), SddmMatrix(lap), 0.1)
        assert rep.passes
        np.testing.assert_allclose([rep.lower, rep.upper], [1.1, 1.1], rtol=1e-9)

    def test_null_space_mismatch(self, rng):
        lap = random_graph_laplacian(10, 0.3, rng)
        with pytest.raises(ValueError):
            generalized_extremes(lap, lap + sp.identity(10) * 0.0 + sp.diags(np.r_[1.0, np.zeros(9)]) * 0 + 
                                 laplacian_from_edges(10, [0], [1], [0.0]) * 0 + sp.identity(10) * 1e-3
                                 if False else np.eye(10) * 0 + np.diag(np.r_[np.ones(9), 0.0]))

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            loewner_approx_check(np.eye(2), np.eye(3), 0.1)

    def test_composition(self, rng):
        for _ in range(10):
            a, b, c = (random_sddm(15, rng) for _ in range(3))
            e1 = loewner_approx_check(a, b, 10).epsilon_achieved
            e2 = loewner_approx_check(b, c, 10).epsilon_achieved
            assert loewner_approx_check(a, c, e1 + e2).passes


def test_strong_dominance():
    m = np.array([[5.0, -1, 0], [-1, 10, -1], [0, -1, 2]])
    assert strong_dominance(m) == pytest.approx(1.0)
    assert strong_dominance(m, [0]) == pytest.approx(4.0)


def test_blocks_partition():
    part = IndexPartition.from_f(3, [1])
    ff, fc, cf, cc = blocks(P3, part)
    assert ff.toarray().tolist() == [[2.0]]
    assert cc.toarray().tolist() == [[1.0, 0.0], [0.0, 1.0]]
