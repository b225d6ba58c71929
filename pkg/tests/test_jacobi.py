import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from schurchain.jacobi import (NnzBudgetExceeded, apply_jacobi, apply_last_step, build_jacobi,
                               build_last_step_operator, jacobi_from_block, jacobi_order, materialize_jacobi)
from schurchain.sddm import SddmMatrix, laplacian_from_edges, xl_decompose

from conftest import random_alpha_block, random_sddm


def dense_series(x, lap, k):
    inv_x = np.diag(1 / x)
    step = -lap @ inv_x
    total, power = np.zeros_like(lap), np.eye(len(x))
    for _ in range(k + 1):
        total += inv_x @ power
        power = power @ step
    return total


def split(m):
    xl = xl_decompose(m)
    return np.asarray(xl.x), xl.laplacian.toarray()


class TestOrder:
    def test_half(self):
        assert jacobi_order(4, 0.5) == 3

    def test_first_schedule_value(self):
        # log_2 36 is about 5.17, smallest odd above is 7
        assert math.log2(36) == pytest.approx(5.17, abs=0.01)
        assert jacobi_order(4, 1 / 18) == 7

    @given(st.floats(4, 100), st.floats(1e-6, 0.5))
    def test_odd_and_minimal(self, alpha, eps):
        k = jacobi_order(alpha, eps)
        target = math.log(2 / eps) / math.log(alpha / 2)
        assert k % 2 == 1 and k >= target - 1e-9
        assert k - 2 < max(target, 1) - 1e-12 or k == 1


def test_build_rejects_weak_alpha(rng):
    m = random_alpha_block(20, 4, rng)
    with pytest.raises(ValueError):
        build_jacobi(m, np.arange(20), alpha=3, eps=0.5)
    with pytest.raises(ValueError):
        build_jacobi(m, np.arange(20), alpha=4, eps=0.9)


def test_build_checks_dominance(rng):
    m = random_sddm(20, rng)
    with pytest.raises(ValueError):
        build_jacobi(m, np.arange(20), alpha=4, eps=0.5)


def test_diagonal_block_divides():
    m = SddmMatrix(np.diag([2.0, 4.0, 5.0]))
    z = build_jacobi(m, [0, 1, 2], alpha=4, eps=0.5)
    b = np.array([1.0, 2.0, 3.0])
    assert np.array_equal(apply_jacobi(z, b), b / np.array([2.0, 4.0, 5.0]))


def test_dense_series_agreement(rng):
    m = random_alpha_block(20, 4, rng, density=0.3)
    z = jacobi_from_block(m.mat, 3)
    x, lap = split(m)
    expected = dense_series(x, lap, 3)
    got = apply_jacobi(z, np.eye(20))
    assert np.linalg.norm(got - expected) <= 1e-12 * np.linalg.norm(expected)


def test_even_k_rejected(rng):
    with pytest.raises(ValueError):
        jacobi_from_block(random_alpha_block(5, 4, rng).mat, 2)


def sandwich_ok(m, k, alpha, slack=1e-8):
    x, lap = split(m)
    beta = 2 / alpha
    delta = beta ** k * (1 + beta) / (1 - beta ** (k + 1))
    zinv = np.linalg.inv(apply_jacobi(jacobi_from_block(m.mat, k), np.eye(m.n)))
    zinv = 0.5 * (zinv + zinv.T)
    lower = np.diag(x) + lap
    upper = np.diag(x) + (1 + delta) * lap
    low_gap = np.linalg.eigvalsh(zinv - lower).min()
    up_gap = np.linalg.eigvalsh(upper - zinv).min()
    scale = np.abs(upper).max()
    return low_gap >= -slack * scale and up_gap >= -slack * scale


@pytest.mark.parametrize("alpha", [4, 8, 16])
@pytest.mark.parametrize("k", [1, 3, 5])
def test_sandwich(rng, alpha, k):
    for n in (10, 60, 200):
        assert sandwich_ok(random_alpha_block(n, alpha, rng, density=min(1, 8 / n)), k, alpha)


def make_dominant_rows(a, f, alpha):
    """Raise the diagonal on F so the FF block is alpha-strongly dominant."""
    a = a.copy()
    for i in f:
        a[i, i] += (1 + alpha) * (np.abs(a[i, f]).sum() - abs(a[i, i]))
    return a


def test_light_block3_hybrid(rng):
    alpha, k = 4, 3
    f = np.arange(0, 50, 3)
    a = make_dominant_rows(random_sddm(50, rng).toarray(), f, alpha)
    zinv = np.linalg.inv(apply_jacobi(jacobi_from_block(a[np.ix_(f, f)], k), np.eye(f.size)))
    hybrid = a.copy()
    hybrid[np.ix_(f, f)] = 0.5 * (zinv + zinv.T)
    beta = 2 / alpha
    assert np.linalg.eigvalsh(hybrid - a).min() >= -1e-9
    assert np.linalg.eigvalsh((1 + 2 * beta ** k) * a - hybrid).min() >= -1e-9


def test_sub_zff_three_factor(rng):
    alpha, k = 4, 3
    n = 40
    f = np.arange(0, n, 4)
    c = np.setdiff1d(np.arange(n), f)
    a = make_dominant_rows(random_sddm(n, rng).toarray(), f, alpha)
    z = apply_jacobi(jacobi_from_block(a[np.ix_(f, f)], k), np.eye(f.size))
    sc = a[np.ix_(c, c)] - a[np.ix_(c, f)] @ np.linalg.solve(a[np.ix_(f, f)], a[np.ix_(f, c)])
    nf = f.size
    left = np.block([[np.eye(nf), np.zeros((nf, c.size))], [-a[np.ix_(c, f)] @ z, np.eye(c.size)]])
    mid = np.block([[z, np.zeros((nf, c.size))], [np.zeros((c.size, nf)), np.linalg.inv(sc)]])
    w = left.T @ mid @ left
    perm = np.concatenate([f, c])
    target = np.linalg.inv(a)[np.ix_(perm, perm)]
    gamma = 2 * (2 / alpha) ** k
    lam = np.linalg.eigvals(np.linalg.solve(target, 0.5 * (w + w.T))).real
    assert lam.min() >= math.exp(-gamma) - 1e-9 and lam.max() <= math.exp(gamma) + 1e-9


class TestMaterialize:
    def test_k1_diagonal(self):
        z = jacobi_from_block(np.diag([2.0, 5.0]), 1)
        assert np.array_equal(materialize_jacobi(z).toarray(), np.diag([0.5, 0.2]))

    def test_k1_general(self, rng):
        m = random_alpha_block(15, 4, rng, density=0.4)
        x, lap = split(m)
        inv_x = np.diag(1 / x)
        expected = inv_x - inv_x @ lap @ inv_x
        got = materialize_jacobi(jacobi_from_block(m.mat, 1)).toarray()
        np.testing.assert_allclose(got, expected, rtol=1e-13, atol=1e-15)

    @pytest.mark.parametrize("k", [1, 3, 5, 7])
    def test_p3_row_counts(self, k):
        lap = laplacian_from_edges(3, [0, 1], [1, 2], [1.0, 1.0])
        z = jacobi_from_block(lap + sp.identity(3), k)
        nnz = np.diff(materialize_jacobi(z).indptr)
        assert nnz.max() <= 2 ** (k + 1)

    def test_matches_apply(self, rng):
        m = random_alpha_block(30, 4, rng)
        z = jacobi_from_block(m.mat, 5)
        np.testing.assert_allclose(materialize_jacobi(z).toarray(), apply_jacobi(z, np.eye(30)), atol=1e-14)

    def test_budget(self, rng):
        m = random_alpha_block(40, 4, rng, density=0.3)
        with pytest.raises(NnzBudgetExceeded) as err:
            materialize_jacobi(jacobi_from_block(m.mat, 5), nnz_budget=50)
        assert err.value.row is not None


class TestLastStep:
    def test_diagonal(self):
        op = build_last_step_operator(np.diag([2.0, 4.0]))
        np.testing.assert_array_equal(apply_last_step(op, np.array([1.0, 1.0])), [0.5, 0.25])

    def test_dense_formula(self, rng):
        m = random_alpha_block(20, 4, rng, density=0.3)
        x, lap = split(m)
        xi = np.diag(1 / x)
        xm = np.diag(x) - lap
        expected = 0.5 * xi + 0.5 * xi @ xm @ xi @ xm @ xi
        got = apply_last_step(build_last_step_operator(m.mat), np.eye(20))
        assert np.linalg.norm(got - expected) <= 1e-12 * np.linalg.norm(expected)

    def test_three_step_sandwich(self, rng):
        alpha = 12
        m = random_alpha_block(40, alpha, rng, density=0.3)
        x, lap = split(m)
        zinv = np.linalg.inv(apply_last_step(build_last_step_operator(m.mat), np.eye(40)))
        zinv = 0.5 * (zinv + zinv.T)
        a = m.toarray()
        assert np.linalg.eigvalsh(zinv - a).min() >= -1e-9
        assert np.linalg.eigvalsh(a + (2 / alpha) * lap - zinv).min() >= -1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 40), st.integers(0, 2 ** 31 - 1), st.sampled_from([1, 3, 5]))
def test_apply_is_linear(n, seed, k):
    r = np.random.default_rng(seed)
    z = jacobi_from_block(random_alpha_block(n, 4, r).mat, k)
    b1, b2 = r.standard_normal(n), r.standard_normal(n)
    np.testing.assert_allclose(apply_jacobi(z, b1 + b2), apply_jacobi(z, b1) + apply_jacobi(z, b2), atol=1e-12)
