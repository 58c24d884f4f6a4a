import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from accurt.dense import expm, expm_action, phi, spectral_norm


def rand(n, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    m = rng.standard_normal((n, n))
    return scale * m / spectral_norm(m)


class TestExpm:
    def test_zero_matrix(self):
        assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))

    def test_diagonal(self):
        got = expm(np.diag([-1.0, -2.0]))
        assert np.allclose(got, np.diag([np.exp(-1.0), np.exp(-2.0)]), rtol=1e-14)

    @pytest.mark.parametrize("t,lam", [(0.5, -1.3), (2.0, 0.7), (1.0, 0.0)])
    def test_jordan_block(self, t, lam):
        j = np.array([[lam, 1.0], [0.0, lam]])
        expected = np.exp(t * lam) * np.array([[1.0, t], [0.0, 1.0]])
        assert np.allclose(expm(t * j), expected, rtol=1e-13, atol=1e-300)

    @pytest.mark.parametrize("seed", range(6))
    @pytest.mark.parametrize("norm", [0.01, 0.9, 3.0, 10.0])
    def test_against_scipy_oracle(self, seed, norm):
        m = rand(7, seed, scale=norm)
        ref = sla.expm(m)
        err = spectral_norm(expm(m) - ref) / spectral_norm(ref)
        assert err <= 1e-13

    def test_inverse_pairing(self):
        for seed in range(4):
            m = rand(6, seed, scale=5.0)
            prod = expm(m) @ expm(-m)
            assert spectral_norm(prod - np.eye(6)) <= 1e-12

    def test_semigroup(self):
        for seed, (s, t) in enumerate([(0.3, 0.7), (1.0, 1.0), (0.05, 0.8)]):
            m = rand(5, seed, scale=5.0)
            lhs = expm((s + t) * m)
            rhs = expm(s * m) @ expm(t * m)
            assert spectral_norm(lhs - rhs) <= 1e-12

    def test_rejects_nonsquare(self):
        with pytest.raises(ValueError):
            expm(np.zeros((2, 3)))

    def test_rejects_nonfinite(self):
        m = np.zeros((2, 2))
        m[0, 1] = np.nan
        with pytest.raises(ValueError):
            expm(m)

    def test_dimension_cap(self):
        big = np.zeros((65, 65))
        with pytest.raises(ValueError):
            expm(big)
        assert expm(big, max_dim=65).shape == (65, 65)


class TestExpmAction:
    def test_t_zero_is_identity(self):
        m = rand(4, 0, scale=3.0)
        w = np.arange(4.0)
        assert np.array_equal(expm_action(m, 0.0, w), w)

    def test_zero_matrix(self):
        w = np.array([1.0, -2.0, 0.5])
        assert np.allclose(expm_action(np.zeros((3, 3)), 5.0, w), w, rtol=1e-15)

    def test_diagonal(self):
        m = np.diag([1.0, 3.0])
        got = expm_action(m, 1.0, np.ones(2))
        assert np.allclose(got, [np.exp(-1.0), np.exp(-3.0)], rtol=1e-14)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            expm_action(np.eye(3), 1.0, np.ones(4))

    def test_negative_t_rejected(self):
        with pytest.raises(ValueError):
            expm_action(np.eye(2), -1.0, np.ones(2))


class TestPhi:
    def test_limit_at_zero(self):
        assert phi(0.0) == 1.0

    def test_at_one(self):
        assert abs(phi(1.0) - (np.e - 1.0)) <= 1e-15

    def test_large_negative(self):
        z = -50.0
        assert abs(phi(z) - (np.expm1(z) / z)) == 0.0
        assert abs(phi(z) - 0.02) <= 1e-3

    @given(st.floats(min_value=-30.0, max_value=5.0).filter(lambda z: abs(z) >= 1e-8))
    @settings(max_examples=300, deadline=None)
    def test_identity_phi_z_plus_one(self, z):
        # phi(z)*z + 1 = e^z to 1e-13, relative to the scale of the summands:
        # for z << 0 the +1 cancellation bounds any double evaluation at ~eps
        assert abs(phi(z) * z + 1.0 - np.exp(z)) <= 1e-13 * max(1.0, np.exp(z))

    @given(st.floats(min_value=0.0, max_value=5.0).filter(lambda z: z >= 1e-8))
    @settings(max_examples=100, deadline=None)
    def test_identity_strict_relative_for_positive_z(self, z):
        assert abs(phi(z) * z + 1.0 - np.exp(z)) <= 1e-13 * np.exp(z)

    def test_series_branch_accuracy(self):
        for z in (1e-6, -3e-6, 9.9e-6):
            exact = np.expm1(z) / z
            assert abs(phi(z) - exact) <= 1e-13 * abs(exact)

    def test_rejects_nonfinite(self):
        with pytest.raises(ValueError):
            phi(np.inf)


class TestSpectralNorm:
    def test_diagonal(self):
        assert spectral_norm(np.diag([3.0, -1.0])) == 3.0

    def test_nilpotent(self):
        assert abs(spectral_norm(np.array([[0.0, 1.0], [0.0, 0.0]])) - 1.0) <= 1e-14

    @pytest.mark.parametrize("seed", range(8))
    def test_against_svd_oracle(self, seed):
        m = np.random.default_rng(seed).standard_normal((5, 5))
        ref = np.linalg.svd(m, compute_uv=False)[0]
        assert abs(spectral_norm(m) - ref) <= 1e-10 * ref

    def test_rectangular(self):
        m = np.random.default_rng(3).standard_normal((4, 7))
        ref = np.linalg.svd(m, compute_uv=False)[0]
        assert abs(spectral_norm(m) - ref) <= 1e-10 * ref

    @given(st.floats(min_value=-100.0, max_value=100.0))
    @settings(max_examples=100, deadline=None)
    def test_absolute_homogeneity(self, alpha):
        m = np.random.default_rng(11).standard_normal((4, 4))
        got = spectral_norm(alpha * m)
        want = abs(alpha) * spectral_norm(m)
        assert abs(got - want) <= 1e-12 * max(want, 1e-30)
