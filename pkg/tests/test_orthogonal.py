import numpy as np
import pytest

from ptcmnet.orthogonal import (
    RankDeficientError,
    householder_qr,
    linear_reference,
    qr_orthonormal,
    with_intercept,
)


@pytest.mark.parametrize("shape", [(5, 5), (20, 3), (200, 11)])
def test_householder_reconstructs(shape):
    A = np.random.default_rng(shape[0]).normal(size=shape)
    Q, R = householder_qr(A)
    np.testing.assert_allclose(Q @ R, A, atol=1e-12)
    np.testing.assert_allclose(Q.T @ Q, np.eye(shape[1]), atol=1e-12)
    assert np.allclose(np.tril(R, -1), 0)


def test_householder_agrees_with_lapack_up_to_signs():
    A = np.random.default_rng(4).normal(size=(50, 6))
    Q, R = householder_qr(A)
    Q2, R2 = np.linalg.qr(A)
    signs = np.sign(np.diag(R)) * np.sign(np.diag(R2))
    np.testing.assert_allclose(Q * signs, Q2, atol=1e-12)


def test_orthonormal_input_returns_itself():
    A, _ = np.linalg.qr(np.random.default_rng(0).normal(size=(30, 4)))
    pp = qr_orthonormal(A)
    np.testing.assert_allclose(np.abs(pp.Q), np.abs(A), atol=1e-12)
    assert np.linalg.norm(pp.project_complement(A)) < 1e-10


def test_square_full_rank_projects_everything():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(5, 4))
    pp = qr_orthonormal(with_intercept(X))
    v = rng.normal(size=(5, 3))
    assert np.abs(pp.project_complement(v)).max() < 1e-12
    np.testing.assert_allclose(pp.project(v), v, atol=1e-12)


def test_duplicate_column_detected():
    X = np.random.default_rng(2).normal(size=(40, 3))
    X = np.column_stack([X, X[:, 1]])
    with pytest.raises(RankDeficientError):
        qr_orthonormal(with_intercept(X))


def test_constant_column_collides_with_intercept():
    X = np.column_stack([np.random.default_rng(3).normal(size=20), np.full(20, 2.0)])
    with pytest.raises(RankDeficientError):
        qr_orthonormal(with_intercept(X))


def test_too_few_rows():
    with pytest.raises(RankDeficientError):
        qr_orthonormal(with_intercept(np.zeros((3, 3))))


def test_complement_of_design_is_zero():
    X = np.random.default_rng(5).normal(size=(50, 3))
    Xt = with_intercept(X)
    pp = qr_orthonormal(Xt)
    assert np.abs(pp.project_complement(Xt)).max() < 1e-10


def test_fixed_points_of_complement():
    rng = np.random.default_rng(6)
    X = rng.normal(size=(60, 2))
    pp = qr_orthonormal(with_intercept(X))
    U = pp.project_complement(rng.normal(size=(60, 4)))
    np.testing.assert_allclose(pp.project_complement(U), U, atol=1e-10)


def test_random_U_becomes_orthogonal():
    rng = np.random.default_rng(7)
    X = rng.normal(size=(80, 3))
    Xt = with_intercept(X)
    pp = qr_orthonormal(Xt)
    U = rng.normal(size=(80, 5))
    out = pp.project_complement(U)
    inner = np.abs(out.T @ Xt)
    scale = np.linalg.norm(out, axis=0)[:, None] * np.linalg.norm(Xt, axis=0)[None, :]
    assert np.all(inner < 1e-8 * scale)


def test_shape_mismatch():
    pp = qr_orthonormal(with_intercept(np.random.default_rng(0).normal(size=(10, 2))))
    with pytest.raises(ValueError):
        pp.project_complement(np.zeros((9, 2)))


def test_linear_reference_matches_batch_projection():
    rng = np.random.default_rng(8)
    X = rng.normal(size=(40, 3))
    U = rng.normal(size=(40, 2)) + X[:, :1] ** 2
    B = linear_reference(X, U)
    pp = qr_orthonormal(with_intercept(X))
    np.testing.assert_allclose(U - with_intercept(X) @ B, pp.project_complement(U), atol=1e-12)
