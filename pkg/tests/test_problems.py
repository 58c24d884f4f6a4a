import numpy as np
import pytest
import scipy.sparse.linalg as spla

from accurt.problems import (
    GridSpec,
    build_problem,
    conv_diff_initial,
    convection_diffusion_matrix,
    convection_matrix,
    maxwell_block_slices,
    maxwell_initial,
    maxwell_yee_matrix,
)
from accurt.sparse import spmv


class TestConvDiff:
    def test_dimension(self):
        assert convection_diffusion_matrix(12, 200.0).n == 100

    def test_pure_diffusion_exactly_symmetric(self):
        a = convection_diffusion_matrix(12, 0.0).to_dense()
        assert np.max(np.abs(a - a.T)) == 0.0

    def test_convection_exactly_skew(self):
        c = convection_matrix(12, 200.0).to_dense()
        assert np.max(np.abs(c + c.T)) == 0.0
        c = convection_matrix(17, 1000.0).to_dense()
        assert np.max(np.abs(c + c.T)) == 0.0

    def test_full_equals_diffusion_plus_convection(self):
        a = convection_diffusion_matrix(12, 200.0).to_dense()
        d = convection_diffusion_matrix(12, 0.0).to_dense()
        c = convection_matrix(12, 200.0).to_dense()
        assert np.allclose(a, d + c, rtol=0, atol=1e-12)

    @pytest.mark.parametrize("nx,pe", [(8, 0.0), (12, 200.0), (16, 1000.0), (22, 200.0)])
    def test_accretive_desk_scale(self, nx, pe):
        a = convection_diffusion_matrix(nx, pe)
        sym = 0.5 * (a.to_dense() + a.to_dense().T)
        norm = np.abs(a.values).max()
        assert np.linalg.eigvalsh(sym).min() >= -1e-10 * norm

    def test_harmonic_face_average_option(self):
        a = convection_diffusion_matrix(12, 0.0, face_average="harmonic").to_dense()
        b = convection_diffusion_matrix(12, 0.0).to_dense()
        assert np.max(np.abs(a - a.T)) == 0.0
        assert not np.array_equal(a, b)

    def test_deterministic(self):
        a = convection_diffusion_matrix(14, 200.0)
        b = convection_diffusion_matrix(14, 200.0)
        assert np.array_equal(a.values, b.values)
        assert np.array_equal(a.col_indices, b.col_indices)

    def test_initial_vector(self):
        v = conv_diff_initial(12)
        assert v.shape == (100,)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-14)
        assert np.all(v > 0)
        # symmetric under x <-> y swap
        assert np.allclose(v.reshape(10, 10), v.reshape(10, 10).T, rtol=0, atol=1e-16)

    def test_validation(self):
        with pytest.raises(ValueError):
            convection_diffusion_matrix(3, 1.0)
        with pytest.raises(ValueError):
            convection_diffusion_matrix(12, -1.0)


@pytest.fixture(scope="module")
def maxwell8():
    return maxwell_yee_matrix(8)


class TestMaxwell:
    def test_dimension_8(self, maxwell8):
        a, d = maxwell8
        assert a.n == 6 * 9 ** 3 == 4374
        assert d.shape == (a.n,)

    def test_scaled_operator_skew(self, maxwell8):
        a, d = maxwell8
        s = (a.to_csr().multiply(d[None, :])).multiply(1.0 / d[:, None]).tocsr()
        assert abs(s + s.T).max() <= 1e-12

    def test_energy_conserved_by_exact_flow(self, maxwell8):
        # scipy's expm_multiply as the independent route
        a, d = maxwell8
        v = maxwell_initial(8)
        y = spla.expm_multiply(-0.8 * a.to_csr(), v)
        before = np.linalg.norm(v / d)
        after = np.linalg.norm(y / d)
        assert abs(after - before) <= 1e-10 * before

    def test_initial_vector(self):
        v = maxwell_initial(8)
        sl = maxwell_block_slices(8)
        assert np.linalg.norm(v) == pytest.approx(1.0, abs=1e-15)
        for name in ("hx", "hy", "hz", "ez"):
            assert np.all(v[sl[name]] == 0.0)
        assert np.count_nonzero(v[sl["ex"]]) == 2
        assert np.count_nonzero(v[sl["ey"]]) == 2

    def test_deterministic(self):
        a1, d1 = maxwell_yee_matrix(8)
        a2, d2 = maxwell_yee_matrix(8)
        assert np.array_equal(a1.values, a2.values)
        assert np.array_equal(d1, d2)

    def test_permittivity_enters_rows(self, maxwell8):
        # E rows inside the specimen scale by 1/5 relative to vacuum rows
        a, d = maxwell8
        vals = np.abs(a.values)
        h = 12.1 / 8
        assert vals.max() == pytest.approx(1.0 / h, rel=1e-12)
        assert vals.min() == pytest.approx(1.0 / (5.0 * h), rel=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError):
            maxwell_yee_matrix(7)
        with pytest.raises(ValueError):
            maxwell_yee_matrix(6)
        with pytest.raises(ValueError):
            maxwell_initial(9)


class TestGridSpec:
    def test_build_conv_diff(self):
        a, v, d = build_problem(GridSpec(kind="conv-diff-2d", nx=12, pe=200.0))
        assert a.n == 100 and v.shape == (100,) and d is None

    def test_build_maxwell(self):
        a, v, d = build_problem(GridSpec(kind="maxwell-yee-3d", cells=8))
        assert a.n == 4374 and d is not None

    def test_rejects_bad_spec(self):
        with pytest.raises(ValueError):
            GridSpec(kind="conv-diff-2d", nx=3)
        with pytest.raises(ValueError):
            GridSpec(kind="maxwell-yee-3d", cells=9)
        with pytest.raises(ValueError):
            GridSpec(kind="unknown")
