"""Material tensor fields: basis, application, certification."""

import numpy as np
import pytest

from crackdyn import Tensor4Field, certify_coercivity, sum_tensors
from crackdyn.tensors import (ExtendedTensor, apply_extended, apply_tensor,
                              from_sym_coords, sym_basis, sym_dim,
                              symmetrize, to_sym_coords)


def random_sym(rng, dim, n=None):
    shape = (dim, dim) if n is None else (n, dim, dim)
    raw = rng.standard_normal(shape)
    return symmetrize(raw)


class TestBasis:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_orthonormal(self, dim):
        basis = sym_basis(dim)
        gram = np.einsum("aij,bij->ab", basis, basis)
        np.testing.assert_allclose(gram, np.eye(sym_dim(dim)), atol=1e-15)

    @pytest.mark.parametrize("dim", [1, 2])
    def test_coords_round_trip(self, dim, rng):
        for _ in range(20):
            A = random_sym(rng, dim)
            back = from_sym_coords(to_sym_coords(A, dim), dim)
            np.testing.assert_allclose(back, A, atol=1e-14)

    def test_coords_preserve_frobenius_norm(self, rng):
        A = random_sym(rng, 2)
        c = to_sym_coords(A, 2)
        assert np.linalg.norm(c) == pytest.approx(np.linalg.norm(A))

    def test_unsupported_dim(self):
        with pytest.raises(ValueError):
            sym_basis(3)


class TestApplication:
    @pytest.mark.parametrize("dim", [1, 2])
    def test_isotropic_closed_form(self, dim, rng):
        lam, mu = 1.3, 0.7
        field = Tensor4Field.isotropic(dim, lam, mu)
        for _ in range(10):
            A = random_sym(rng, dim)
            want = lam * np.trace(A) * np.eye(dim) + 2.0 * mu * A
            np.testing.assert_allclose(apply_tensor(field, A), want,
                                       atol=1e-14)

    def test_identity_is_identity(self, rng):
        field = Tensor4Field.identity(2)
        A = random_sym(rng, 2)
        np.testing.assert_allclose(apply_tensor(field, A), A, atol=1e-15)

    def test_piecewise_batch_matches_per_cell_loop(self, rng):
        n = 5
        mats = np.stack([np.eye(3) * (k + 1) for k in range(n)])
        field = Tensor4Field(mats, 2)
        A = random_sym(rng, 2, n=n)
        out = apply_tensor(field, A)
        for k in range(n):
            cell_field = Tensor4Field(mats[k], 2)
            np.testing.assert_allclose(out[k], apply_tensor(cell_field, A[k]),
                                       atol=1e-14)

    def test_piecewise_batch_shape_checked(self, rng):
        field = Tensor4Field(np.stack([np.eye(3)] * 4), 2)
        with pytest.raises(ValueError):
            apply_tensor(field, random_sym(rng, 2, n=3))

    def test_cellwise_broadcast_and_mismatch(self):
        homo = Tensor4Field.isotropic(2, 1.0, 1.0)
        cw = homo.cellwise(6)
        assert cw.n_cells == 6
        np.testing.assert_allclose(cw.matrix[3], homo.matrix)
        with pytest.raises(ValueError):
            cw.cellwise(7)

    def test_scaled_and_sum(self, rng):
        a = Tensor4Field.isotropic(2, 1.0, 0.5)
        b = Tensor4Field.identity(2).scaled(0.25)
        s = sum_tensors(a, b)
        A = random_sym(rng, 2)
        want = apply_tensor(a, A) + apply_tensor(b, A)
        np.testing.assert_allclose(apply_tensor(s, A), want, atol=1e-14)

    def test_sum_dimension_mismatch(self):
        with pytest.raises(ValueError):
            sum_tensors(Tensor4Field.identity(1), Tensor4Field.identity(2))

    def test_sup_norm_is_operator_norm(self):
        field = Tensor4Field.isotropic(2, 2.0, 1.0)
        # eigenvalues of the ONB matrix: 2mu (twice), 2mu + 2lam
        assert field.sup_norm() == pytest.approx(6.0)

    def test_extended_tensor_kills_antisymmetric_part(self, rng):
        ext = ExtendedTensor(Tensor4Field.isotropic(2, 1.0, 2.0))
        raw = rng.standard_normal((2, 2))
        anti = 0.5 * (raw - raw.T)
        np.testing.assert_allclose(apply_extended(ext, anti),
                                   np.zeros((2, 2)), atol=1e-14)
        full = rng.standard_normal((2, 2))
        np.testing.assert_allclose(
            apply_extended(ext, full),
            apply_tensor(ext.base, symmetrize(full)), atol=1e-14)
        assert ext.dim == 2
        assert ext.sup_norm() == ext.base.sup_norm()

    def test_bad_matrix_shape_rejected(self):
        with pytest.raises(ValueError):
            Tensor4Field(np.eye(2), 2)    # needs 3x3 for dim 2


class TestCertification:
    def test_isotropic_constants(self):
        cert = certify_coercivity(Tensor4Field.isotropic(2, 2.0, 1.0))
        assert cert.ok
        assert cert.alpha0 == pytest.approx(2.0)       # 2*mu
        assert cert.sup_bound == pytest.approx(6.0)    # 2*mu + 2*lam
        assert cert.symmetry_defect <= 1e-12

    def test_identity_alpha0_is_one(self):
        cert = certify_coercivity(Tensor4Field.identity(2))
        assert cert.alpha0 == pytest.approx(1.0)
        assert cert.sup_bound == pytest.approx(1.0)

    def test_1d_isotropic(self):
        cert = certify_coercivity(Tensor4Field.isotropic(1, 1.0, 0.5))
        assert cert.alpha0 == pytest.approx(2.0)       # lam + 2*mu

    def test_detects_asymmetry(self):
        mat = np.eye(3)
        mat[0, 1] = 0.5
        cert = certify_coercivity(Tensor4Field(mat, 2))
        assert not cert.symmetric
        assert not cert.ok
        assert cert.symmetry_defect > 1e-3

    def test_detects_loss_of_coercivity(self):
        mat = np.diag([1.0, 1.0, -0.25])
        cert = certify_coercivity(Tensor4Field(mat, 2))
        assert cert.symmetric
        assert not cert.coercive
        assert cert.alpha0 == pytest.approx(-0.25)

    def test_piecewise_alpha0_is_worst_cell(self):
        mats = np.stack([np.eye(3), np.diag([0.5, 2.0, 3.0])])
        cert = certify_coercivity(Tensor4Field(mats, 2))
        assert cert.alpha0 == pytest.approx(0.5)
        assert cert.sup_bound == pytest.approx(3.0)

    def test_random_spd_certified(self, rng):
        for _ in range(10):
            raw = rng.standard_normal((3, 3))
            mat = raw @ raw.T + 0.1 * np.eye(3)
            cert = certify_coercivity(Tensor4Field(mat, 2))
            eigs = np.linalg.eigvalsh(mat)
            assert cert.ok
            assert cert.alpha0 == pytest.approx(eigs[0])
            assert cert.sup_bound == pytest.approx(abs(eigs).max())
