import numpy as np
import pytest
import scipy.sparse as sp

from accurt.problems import convection_diffusion_matrix
from accurt.solvers import LinearOperator, gmres_restarted
from accurt.sparse import (
    SingularMatrixError,
    SparseMatrix,
    ilut_factorize,
    lu_factorize,
    shifted,
    solve,
    spmv,
)


def random_sparse(n, seed, diag_boost=10.0):
    rng = np.random.default_rng(seed)
    m = sp.random(n, n, density=0.3, random_state=rng, format="csr")
    m = m + diag_boost * sp.eye(n, format="csr")
    return SparseMatrix.from_scipy(m)


class TestSparseMatrix:
    def test_invariant_violations(self):
        with pytest.raises(ValueError):
            SparseMatrix(2, np.array([0, 1]), np.array([0]), np.array([1.0]))
        with pytest.raises(ValueError):  # decreasing offsets
            SparseMatrix(2, np.array([0, 2, 1]), np.array([0, 1]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):  # column out of range
            SparseMatrix(2, np.array([0, 1, 2]), np.array([0, 2]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):  # duplicate column in one row
            SparseMatrix(2, np.array([0, 2, 2]), np.array([1, 1]), np.array([1.0, 1.0]))
        with pytest.raises(ValueError):  # non-finite value
            SparseMatrix(1, np.array([0, 1]), np.array([0]), np.array([np.inf]))

    def test_immutable(self):
        a = random_sparse(5, 0)
        with pytest.raises(ValueError):
            a.values[0] = 7.0

    def test_round_trip_dense(self):
        a = random_sparse(8, 1)
        assert np.array_equal(SparseMatrix.from_dense(a.to_dense()).to_dense(), a.to_dense())


class TestSpmv:
    def test_identity(self):
        a = SparseMatrix.identity(7)
        x = np.arange(7.0)
        assert np.array_equal(spmv(a, x), x)

    def test_zero_matrix(self):
        a = SparseMatrix(3, np.zeros(4, dtype=np.int64), np.zeros(0, dtype=np.int64), np.zeros(0))
        assert np.array_equal(spmv(a, np.ones(3)), np.zeros(3))

    def test_against_dense_oracle(self):
        a = random_sparse(20, 2)
        x = np.random.default_rng(3).standard_normal(20)
        assert np.linalg.norm(spmv(a, x) - a.to_dense() @ x) <= 1e-14 * np.linalg.norm(x)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            spmv(SparseMatrix.identity(3), np.ones(4))

    def test_deterministic(self):
        a = random_sparse(50, 4)
        x = np.random.default_rng(5).standard_normal(50)
        assert np.array_equal(spmv(a, x), spmv(a, x))


class TestShifted:
    def test_gamma_zero_is_identity(self):
        a = random_sparse(6, 6, diag_boost=0.0)
        assert np.array_equal(shifted(a, 0.0).to_dense(), np.eye(6))

    def test_identity_input(self):
        s = shifted(SparseMatrix.identity(4), 2.5)
        assert np.array_equal(s.to_dense(), 3.5 * np.eye(4))

    def test_matches_dense_construction_bitwise(self):
        a = random_sparse(9, 7)
        g = 0.05
        assert np.array_equal(shifted(a, g).to_dense(), np.eye(9) + g * a.to_dense())

    def test_explicit_diagonal_under_structural_zero(self):
        # A with an empty diagonal row entry still gets a stored 1.0
        a = SparseMatrix(2, np.array([0, 1, 2]), np.array([1, 0]), np.array([5.0, 5.0]))
        s = shifted(a, 0.0)
        assert s.nnz == 2 and np.array_equal(s.to_dense(), np.eye(2))

    def test_rejects_negative_gamma(self):
        with pytest.raises(ValueError):
            shifted(SparseMatrix.identity(2), -0.1)


class TestExactLU:
    def test_identity(self):
        f = lu_factorize(SparseMatrix.identity(5))
        b = np.arange(5.0)
        assert np.allclose(solve(f, b), b, rtol=0, atol=1e-15)

    def test_tridiagonal_against_dense(self):
        n = 10
        m = SparseMatrix.from_scipy(
            sp.diags([-np.ones(n - 1), 2 * np.ones(n), -np.ones(n - 1)], [-1, 0, 1]))
        b = np.ones(n)
        x = solve(lu_factorize(m), b)
        assert np.linalg.norm(x - np.linalg.solve(m.to_dense(), b)) <= 1e-10 * np.linalg.norm(x)

    def test_shifted_conv_diff_residual(self):
        a = convection_diffusion_matrix(12, 200.0)
        m = shifted(a, 0.05)
        f = lu_factorize(m, shift_gamma=0.05)
        b = np.ones(m.n)
        x = solve(f, b)
        assert np.linalg.norm(spmv(m, x) - b) <= 1e-10 * np.linalg.norm(b)
        assert f.shift_gamma == 0.05

    def test_diag_example(self):
        f = lu_factorize(SparseMatrix.from_dense(np.diag([2.0, 4.0])))
        assert np.allclose(solve(f, np.array([2.0, 4.0])), [1.0, 1.0], rtol=1e-14)

    def test_random_against_dense_inverse(self):
        a = random_sparse(15, 8)
        f = lu_factorize(a)
        b = np.random.default_rng(9).standard_normal(15)
        want = np.linalg.solve(a.to_dense(), b)
        assert np.linalg.norm(f.solve(b) - want) <= 1e-10 * np.linalg.norm(want)

    def test_singular_detected(self):
        m = SparseMatrix.from_dense(np.array([[1.0, 2.0], [2.0, 4.0]]))
        with pytest.raises(SingularMatrixError):
            lu_factorize(m)

    def test_solve_roundtrip_property(self):
        for seed in range(5):
            m = random_sparse(12, 100 + seed)
            x = np.random.default_rng(seed).standard_normal(12)
            b = spmv(m, x)
            got = solve(lu_factorize(m), b)
            assert np.linalg.norm(got - x) <= 1e-9 * np.linalg.norm(x)

    def test_accretive_shift_never_singular(self):
        # eigenvalues of the symmetric part are >= 0, so I + gamma*A is regular
        a = convection_diffusion_matrix(8, 500.0)
        sym = 0.5 * (a.to_dense() + a.to_dense().T)
        assert np.linalg.eigvalsh(sym).min() >= -1e-10 * np.abs(a.values).max()
        for gamma in (1e-6, 0.05, 1.0, 100.0):
            lu_factorize(shifted(a, gamma))  # must not raise


class TestILUT:
    def test_identity_exact(self):
        f = ilut_factorize(SparseMatrix.identity(6), 0.5)
        b = np.arange(6.0)
        assert np.allclose(f.solve(b), b, rtol=0, atol=1e-15)

    def test_zero_drop_matches_exact_lu(self):
        a = random_sparse(12, 20)
        f = ilut_factorize(a, 0.0)
        b = np.random.default_rng(21).standard_normal(12)
        want = np.linalg.solve(a.to_dense(), b)
        assert np.linalg.norm(f.solve(b) - want) <= 1e-10 * np.linalg.norm(want)
        assert f.pivot_repairs == 0

    def test_factors_triangular(self):
        a = random_sparse(10, 22)
        f = ilut_factorize(a, 1e-3)
        lower = f.lower.toarray()
        upper = f.upper.toarray()
        assert np.array_equal(lower, np.tril(lower, -1))
        assert np.array_equal(upper, np.triu(upper))

    def test_zero_pivot_repaired_and_counted(self):
        m = SparseMatrix.from_dense(np.array([[0.0, 1.0], [1.0, 0.0]]))
        f = ilut_factorize(m, 1e-2)
        assert f.pivot_repairs >= 1

    def test_absolute_drop_mode(self):
        a = random_sparse(10, 23)
        f = ilut_factorize(a, 1e-8, relative_to_row_norm=False)
        b = np.ones(10)
        want = np.linalg.solve(a.to_dense(), b)
        assert np.linalg.norm(f.solve(b) - want) <= 1e-6 * np.linalg.norm(want)

    def test_preconditions_gmres_on_conv_diff(self):
        # drop tolerance 1e-3 keeps GMRES(10) on the shifted operator under
        # 30 iterations at tolerance 1e-10
        a = convection_diffusion_matrix(102, 200.0)
        gamma = 0.05
        m = shifted(a, gamma)
        f = ilut_factorize(m, 1e-3, shift_gamma=gamma)
        op = LinearOperator.shifted_action(a, gamma)
        b = np.random.default_rng(1).standard_normal(a.n)
        x, stats = gmres_restarted(op, b, restart_m=10, precond=f, tol=1e-10, max_outer=10)
        assert stats.converged
        assert stats.iterations <= 30
        assert np.linalg.norm(spmv(m, x) - b) <= 1e-8 * np.linalg.norm(b)
