"""Thin Householder QR and the projection onto the complement of ``[1, X]``.

Projectors are never formed as ``N x N`` matrices; ``P v`` is applied as
``Q (Q^T v)``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

RANK_TOL = 1e-10


class RankDeficientError(ValueError):
    """The design ``[1, X]`` does not have full column rank."""


def householder_qr(A):
    """Thin QR factorization ``A = Q R`` by Householder reflections.

    Parameters
    ----------
    A : ndarray, shape (m, n) with m >= n

    Returns
    -------
    Q : ndarray, shape (m, n)
        Orthonormal columns.
    R : ndarray, shape (n, n)
        Upper triangular.
    """
    A = np.array(A, dtype=float)
    m, n = A.shape
    if m < n:
        raise ValueError(f"thin QR needs at least as many rows as columns, got {A.shape}")
    R = A
    vs = []
    for k in range(n):
        x = R[k:, k]
        normx = np.linalg.norm(x)
        if normx == 0.0:
            vs.append(None)
            continue
        v = x.copy()
        v[0] += np.copysign(normx, x[0])
        v /= np.linalg.norm(v)
        R[k:, k:] -= 2.0 * np.outer(v, v @ R[k:, k:])
        vs.append(v)

    Q = np.eye(m, n)
    for k in reversed(range(n)):
        v = vs[k]
        if v is None:
            continue
        Q[k:, :] -= 2.0 * np.outer(v, v @ Q[k:, :])
    return Q, np.triu(R[:n, :])


def with_intercept(X):
    X = np.asarray(X, dtype=float)
    return np.column_stack([np.ones(X.shape[0]), X])


@dataclass
class ProjectionPair:
    """Orthonormal basis ``Q`` of the column span of ``[1, X]``.

    ``P = Q Q^T`` projects onto that span and ``P_perp = I - P`` onto its
    orthogonal complement.
    """

    Q: np.ndarray
    R: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.Q.shape[0]

    def project(self, U):
        U = self._check(U)
        return self.Q @ (self.Q.T @ U)

    def project_complement(self, U):
        U = self._check(U)
        return U - self.Q @ (self.Q.T @ U)

    def _check(self, U):
        U = np.asarray(U, dtype=float)
        if U.shape[0] != self.n_rows:
            raise ValueError(f"expected {self.n_rows} rows, got {U.shape[0]}")
        return U


def qr_orthonormal(Xtilde, tol: float = RANK_TOL) -> ProjectionPair:
    """Factorize the augmented design and check its column rank.

    A diagonal entry of ``R`` below ``tol * ||Xtilde||_F`` is treated as
    a rank deficiency; collinear covariates must be dropped by the caller.
    """
    Xtilde = np.asarray(Xtilde, dtype=float)
    n, k = Xtilde.shape
    if n < k:
        raise RankDeficientError(
            f"{n} rows cannot span {k} columns; batches must hold more than q + 1 rows"
        )
    Q, R = householder_qr(Xtilde)
    scale = np.linalg.norm(Xtilde)
    small = np.flatnonzero(np.abs(np.diag(R)) < tol * scale)
    if small.size:
        raise RankDeficientError(
            f"design [1, X] is rank deficient (column(s) {small.tolist()} of [1, X] "
            "are linear combinations of earlier ones); drop collinear covariates"
        )
    return ProjectionPair(Q, R)


def project_complement(pp: ProjectionPair, U):
    return pp.project_complement(U)


def linear_reference(X, U):
    """Least-squares coefficients ``B`` of ``U`` on ``[1, X]``.

    ``U - [1, X] B`` equals ``P_perp U`` on this design and extends the
    projection to new rows as a fixed function of the covariates.
    """
    pp = qr_orthonormal(with_intercept(X))
    return solve_triangular(pp.R, pp.Q.T @ np.asarray(U, dtype=float))
