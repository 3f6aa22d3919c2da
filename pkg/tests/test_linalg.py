import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from steklov_dumbbell import linalg
from steklov_dumbbell.errors import NoConvergence, NotPositiveDefinite
from steklov_dumbbell.linalg import DEFAULT_SETTINGS


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A.T @ A + np.eye(n)


def random_sym(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((n, n))
    return A + A.T


class TestSparse:
    def test_duplicates_summed_and_zeros_dropped(self):
        A = linalg.sym_from_triplets(3, [0, 0, 1, 2, 2], [0, 0, 2, 1, 2], [1.0, 2.0, 0.5, 0.5, 0.0])
        assert A[0, 0] == 3.0 and A[1, 2] == A[2, 1] == 0.5
        assert A.nnz == 3
        assert (A != A.T).nnz == 0


class TestCG:
    def test_identity(self):
        b = np.arange(1.0, 6.0)
        np.testing.assert_allclose(linalg.cg_solve(sp.identity(5, format="csr"), b), b)

    def test_diagonal(self):
        A = sp.diags(np.arange(1.0, 6.0)).tocsr()
        np.testing.assert_allclose(linalg.cg_solve(A, np.ones(5)), 1 / np.arange(1.0, 6.0), rtol=1e-12)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_spd_matches_cholesky(self, seed):
        A = random_spd(50, seed)
        b = np.random.default_rng(seed + 10).standard_normal(50)
        x = linalg.cg_solve(sp.csr_matrix(A), b, tol=1e-10)
        assert np.linalg.norm(A @ x - b) <= 1e-10 * np.linalg.norm(b)
        np.testing.assert_allclose(x, linalg.cholesky_solve(linalg.cholesky(A), b), rtol=1e-6, atol=1e-9)

    def test_block_equals_columnwise(self):
        A = sp.csr_matrix(random_spd(30, 4))
        B = np.random.default_rng(5).standard_normal((30, 4))
        X = linalg.cg_solve(A, B)
        for j in range(4):
            np.testing.assert_allclose(X[:, j], linalg.cg_solve(A, B[:, j]), rtol=1e-12, atol=1e-14)

    def test_zero_rhs(self):
        assert np.all(linalg.cg_solve(sp.csr_matrix(random_spd(5, 0)), np.zeros(5)) == 0)

    def test_iteration_cap(self):
        A = sp.csr_matrix(random_spd(40, 1))
        with pytest.raises(NoConvergence):
            linalg.cg_solve(A, np.ones(40), tol=1e-14, maxiter=2)

    def test_indefinite(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cg_solve(sp.csr_matrix(np.diag([1.0, -1.0])), np.ones(2))
        with pytest.raises(NotPositiveDefinite):
            linalg.cg_solve(sp.csr_matrix(np.array([[1.0, 2.0], [2.0, 1.0]])), np.array([1.0, -1.0]))


class TestCholesky:
    def test_identity(self):
        np.testing.assert_array_equal(linalg.cholesky(np.eye(4)), np.eye(4))

    def test_hand_example(self):
        np.testing.assert_allclose(linalg.cholesky(np.array([[4.0, 2.0], [2.0, 5.0]])), [[2, 0], [1, 2]])

    def test_singular(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.cholesky(np.array([[1.0, 1.0], [1.0, 1.0]]))

    @pytest.mark.parametrize("seed", range(3))
    def test_reconstruction(self, seed):
        A = random_spd(25, seed)
        L = linalg.cholesky(A)
        assert np.max(np.abs(L @ L.T - A)) <= 1e-10 * np.max(np.abs(A))
        assert np.all(np.triu(L, 1) == 0)


class TestSymEig:
    def test_diagonal(self):
        s = linalg.sym_eig(np.diag([3.0, 1.0, 2.0]))
        np.testing.assert_allclose(s.values, [1, 2, 3])

    def test_swap(self):
        np.testing.assert_allclose(linalg.sym_eig(np.array([[0.0, 1.0], [1.0, 0.0]])).values, [-1, 1], atol=1e-15)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_invariants(self, seed):
        A = random_sym(20, seed)
        s = linalg.sym_eig(A)
        assert np.all(np.diff(s.values) >= 0)
        assert s.values.sum() == pytest.approx(np.trace(A), abs=1e-10)
        assert np.sqrt(np.sum(s.values ** 2)) == pytest.approx(np.linalg.norm(A), rel=1e-10)
        scale = np.max(np.abs(A))
        assert np.max(np.abs(A @ s.vectors - s.vectors * s.values)) <= 1e-9 * scale
        assert s.orthonormality_defect() <= 1e-8

    def test_backends_agree(self):
        A = random_sym(30, 7)
        a = linalg.sym_eig(A)
        b = linalg.sym_eig(A, DEFAULT_SETTINGS.updated(eig_backend="lapack"))
        np.testing.assert_allclose(a.values, b.values, atol=1e-10)

    def test_sweep_cap(self):
        with pytest.raises(NoConvergence):
            linalg.sym_eig(random_sym(20, 1), DEFAULT_SETTINGS.updated(jacobi_max_sweeps=1))


class TestGenEig:
    def test_diagonal_pair(self):
        s = linalg.gen_sym_eig(np.diag([2.0, 8.0]), np.diag([1.0, 2.0]))
        np.testing.assert_allclose(s.values, [2, 4])
        assert s.gram == "B"

    def test_equal_matrices(self):
        B = random_spd(8, 2)
        np.testing.assert_allclose(linalg.gen_sym_eig(B, B).values, np.ones(8), rtol=1e-10)

    @pytest.mark.parametrize("seed", range(3))
    def test_random_pair_residual(self, seed):
        A, B = random_sym(15, seed), random_spd(15, seed + 100)
        s = linalg.gen_sym_eig(A, B)
        R = A @ s.vectors - (B @ s.vectors) * s.values
        scale = np.linalg.norm(A) + np.linalg.norm(B)
        assert np.max(np.linalg.norm(R, axis=0)) <= 1e-8 * scale
        assert s.orthonormality_defect() <= 1e-8

    def test_identity_mass_matches_standard(self):
        A = random_sym(12, 3)
        np.testing.assert_allclose(linalg.gen_sym_eig(A, np.eye(12)).values, linalg.sym_eig(A).values, atol=1e-10)

    def test_shift(self):
        A, B = random_sym(12, 4), random_spd(12, 5)
        np.testing.assert_allclose(linalg.gen_sym_eig(A + B, B).values, linalg.gen_sym_eig(A, B).values + 1, atol=1e-9)

    def test_indefinite_mass(self):
        with pytest.raises(NotPositiveDefinite):
            linalg.gen_sym_eig(np.eye(2), np.diag([1.0, -1.0]))


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, (6, 6), elements=st.floats(-10, 10)))
def test_sym_eig_property(M):
    A = M + M.T
    s = linalg.sym_eig(A)
    assert np.all(np.diff(s.values) >= 0)
    assert s.orthonormality_defect() <= 1e-8
    scale = max(np.max(np.abs(A)), 1e-300)
    assert np.max(np.abs(A @ s.vectors - s.vectors * s.values)) <= 1e-9 * max(scale, 1.0)
