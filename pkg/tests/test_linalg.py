"""Unit and property tests for the dense linear-algebra kernels."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from encgan.errors import ContractError, SingularMatrixError
from encgan.linalg import (
    covariance_trace,
    gram_inverse,
    pseudo_inverse_apply,
    sym_eigen,
    tangential_projector,
)


class TestSymEigen:
    def test_diagonal_case(self):
        w, v = sym_eigen(np.diag([3.0, 1.0]))
        np.testing.assert_allclose(w, [3.0, 1.0])
        np.testing.assert_allclose(np.abs(v), np.eye(2), atol=1e-12)

    def test_known_two_by_two_spectrum(self):
        w, _ = sym_eigen(np.array([[2.0, 1.0], [1.0, 2.0]]))
        np.testing.assert_allclose(w, [3.0, 1.0], atol=1e-12)

    def test_reconstruction_oracle_random_6x6(self):
        rng = np.random.default_rng(0)
        m = rng.normal(size=(6, 6))
        m = (m + m.T) / 2.0
        w, v = sym_eigen(m)
        assert np.abs(v @ np.diag(w) @ v.T - m).max() < 1e-8

    def test_eigenpairs_satisfy_definition(self):
        rng = np.random.default_rng(1)
        m = rng.normal(size=(8, 8))
        m = (m + m.T) / 2.0
        w, v = sym_eigen(m)
        norm = np.linalg.norm(m)
        for k in range(8):
            assert np.linalg.norm(m @ v[:, k] - w[k] * v[:, k]) < 1e-8 * norm

    def test_eigenvalue_sum_equals_trace(self):
        rng = np.random.default_rng(2)
        for _ in range(20):
            m = rng.normal(size=(5, 5))
            m = (m + m.T) / 2.0
            w, _ = sym_eigen(m)
            assert abs(w.sum() - np.trace(m)) < 1e-9

    def test_eigenvectors_orthonormal(self):
        rng = np.random.default_rng(3)
        m = rng.normal(size=(7, 7))
        m = (m + m.T) / 2.0
        _, v = sym_eigen(m)
        assert np.abs(v.T @ v - np.eye(7)).max() < 1e-8

    def test_rejects_asymmetric(self):
        with pytest.raises(ContractError, match="symmetric"):
            sym_eigen(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_descending_order(self):
        rng = np.random.default_rng(4)
        m = rng.normal(size=(9, 9))
        m = (m + m.T) / 2.0
        w, _ = sym_eigen(m)
        assert np.all(np.diff(w) <= 0)

    def test_moderate_size(self):
        rng = np.random.default_rng(5)
        m = rng.normal(size=(60, 60))
        m = (m + m.T) / 2.0
        w, v = sym_eigen(m)
        assert np.abs(v @ np.diag(w) @ v.T - m).max() < 1e-8 * np.linalg.norm(m)


class TestPseudoInverseApply:
    def test_orthonormal_columns_reduce_to_transpose(self):
        q, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(6, 3)))
        coeff = np.array([1.0, -2.0, 0.5])
        y = q @ coeff
        np.testing.assert_allclose(pseudo_inverse_apply(q, y), q.T @ y, atol=1e-12)

    def test_axis_projection_eliminates_normal_component(self):
        u = np.array([[1.0], [0.0]])
        np.testing.assert_allclose(pseudo_inverse_apply(u, np.array([3.0, 7.0])), [3.0])

    def test_matches_gram_schmidt_projection_oracle(self):
        rng = np.random.default_rng(6)
        u = rng.normal(size=(6, 3))
        y = rng.normal(size=6)
        coeff = pseudo_inverse_apply(u, y)
        # independent projector built by Gram-Schmidt orthogonalization
        basis = []
        for col in u.T:
            vec = col.copy()
            for b in basis:
                vec -= (vec @ b) * b
            basis.append(vec / np.linalg.norm(vec))
        projection = sum((y @ b) * b for b in basis)
        assert np.linalg.norm(u @ coeff - projection) < 1e-9

    def test_idempotent_through_u(self):
        rng = np.random.default_rng(7)
        for _ in range(20):
            u = rng.normal(size=(8, 4))
            coeff = rng.normal(size=4)
            recovered = pseudo_inverse_apply(u, u @ coeff)
            assert np.abs(recovered - coeff).max() < 1e-10

    def test_batch_rows_match_single_vectors(self):
        rng = np.random.default_rng(8)
        u = rng.normal(size=(7, 3))
        ys = rng.normal(size=(5, 7))
        batch = pseudo_inverse_apply(u, ys)
        for k in range(5):
            np.testing.assert_allclose(batch[k], pseudo_inverse_apply(u, ys[k]),
                                       atol=1e-12)

    def test_rank_deficient_raises_with_eigenvalue(self):
        u = np.zeros((5, 2))
        u[:, 0] = 1.0
        u[:, 1] = 2.0  # colinear columns
        with pytest.raises(SingularMatrixError) as excinfo:
            pseudo_inverse_apply(u, np.ones(5))
        assert excinfo.value.eigenvalue is not None
        assert excinfo.value.eigenvalue < 1e-8

    def test_wide_matrix_rejected(self):
        with pytest.raises(ContractError):
            pseudo_inverse_apply(np.ones((2, 3)), np.ones(2))


class TestCovarianceTrace:
    def test_identical_vectors_zero(self):
        v = np.array([1.0, 2.0, 3.0])
        assert covariance_trace([v, v, v]) == 0.0

    def test_two_scalars(self):
        assert covariance_trace([np.array([0.0]), np.array([2.0])]) == pytest.approx(2.0)

    def test_outer_product_matrix_oracle(self):
        rng = np.random.default_rng(9)
        vectors = [rng.normal(size=4) for _ in range(5)]
        mean = np.mean(vectors, axis=0)
        cov = sum(np.outer(v - mean, v - mean) for v in vectors) / 4.0
        assert abs(covariance_trace(vectors) - np.trace(cov)) < 1e-12

    def test_rejects_single_vector(self):
        with pytest.raises(ContractError):
            covariance_trace([np.ones(3)])

    @given(st.lists(st.lists(st.floats(-100, 100), min_size=3, max_size=3),
                    min_size=2, max_size=8))
    @settings(max_examples=60, deadline=None)
    def test_nonnegative_always(self, rows):
        vectors = [np.asarray(r) for r in rows]
        assert covariance_trace(vectors) >= 0.0

    @given(st.integers(2, 6), st.integers(0, 10 ** 6))
    @settings(max_examples=40, deadline=None)
    def test_zero_iff_all_equal(self, count, seed):
        rng = np.random.default_rng(seed)
        base = rng.normal(size=4)
        assert covariance_trace([base.copy() for _ in range(count)]) < 1e-12
        spread = [base + rng.normal(0.1, 0.05, size=4) for _ in range(count)]
        spread[0] = spread[0] + 1.0
        assert covariance_trace(spread) > 1e-12


class TestProjectors:
    def test_gram_inverse_matches_inv(self):
        rng = np.random.default_rng(10)
        u = rng.normal(size=(6, 3))
        np.testing.assert_allclose(gram_inverse(u), np.linalg.inv(u.T @ u), atol=1e-10)

    def test_projector_idempotent_and_symmetric(self):
        rng = np.random.default_rng(11)
        u = rng.normal(size=(7, 2))
        p = tangential_projector(u)
        np.testing.assert_allclose(p @ p, p, atol=1e-10)
        np.testing.assert_allclose(p, p.T, atol=1e-12)
