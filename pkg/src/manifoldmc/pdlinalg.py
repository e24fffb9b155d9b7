"""Dense symmetric positive-definite linear algebra.

Cholesky factorization with an explicit pivot tolerance, triangular solves,
log-determinants, and partially-pivoted LU for the small general systems the
Lagrangian integrator forms.  The loops are numba-compiled (see _jit) so the
same routines serve both the Python API and the jitted sampler cores.
"""

from dataclasses import dataclass

import numpy as np

from ._jit import njit

# Pivot at or below this declares the matrix non-PD.  Metrics in this package
# are PD by construction, so a failure indicates a target/parameter bug and
# should be loud rather than silently regularized.
PIVOT_TOL = 1e-12


class NotPositiveDefinite(Exception):
    """Raised when a Cholesky pivot falls at or below the tolerance."""


@njit
def chol_lower(S, tol):
    """Lower Cholesky factor of S. Returns (L, ok); ok False on pivot <= tol."""
    m = S.shape[0]
    L = np.zeros((m, m))
    for j in range(m):
        s = S[j, j] - np.dot(L[j, :j], L[j, :j])
        if s <= tol:
            return L, False
        L[j, j] = np.sqrt(s)
        for i in range(j + 1, m):
            L[i, j] = (S[i, j] - np.dot(L[i, :j], L[j, :j])) / L[j, j]
    return L, True


@njit
def chol_logdet(L):
    m = L.shape[0]
    acc = 0.0
    for j in range(m):
        acc += np.log(L[j, j])
    return 2.0 * acc


@njit
def solve_lower(L, b):
    """x with L x = b (forward substitution)."""
    m = L.shape[0]
    x = np.zeros(m)
    for i in range(m):
        x[i] = (b[i] - np.dot(L[i, :i], x[:i])) / L[i, i]
    return x


@njit
def solve_lower_t(L, b):
    """x with L^T x = b (back substitution on the transpose)."""
    m = L.shape[0]
    x = np.zeros(m)
    for i in range(m - 1, -1, -1):
        acc = b[i]
        for k in range(i + 1, m):
            acc -= L[k, i] * x[k]
        x[i] = acc / L[i, i]
    return x


@njit
def chol_solve(L, b):
    """x with (L L^T) x = b."""
    return solve_lower_t(L, solve_lower(L, b))


@njit
def chol_solve_mat(L, B):
    """X with (L L^T) X = B for a matrix right-hand side."""
    m, ncol = B.shape
    X = np.zeros((m, ncol))
    for j in range(ncol):
        X[:, j] = solve_lower_t(L, solve_lower(L, B[:, j]))
    return X


@njit
def lu_factor(A):
    """In-place-style LU with partial pivoting. Returns (LU, piv, sign, ok)."""
    m = A.shape[0]
    LU = A.copy()
    piv = np.zeros(m, dtype=np.int64)
    sign = 1.0
    for k in range(m):
        pk = k
        best = abs(LU[k, k])
        for i in range(k + 1, m):
            if abs(LU[i, k]) > best:
                best = abs(LU[i, k])
                pk = i
        piv[k] = pk
        if best == 0.0:
            return LU, piv, 0.0, False
        if pk != k:
            for j in range(m):
                tmp = LU[k, j]
                LU[k, j] = LU[pk, j]
                LU[pk, j] = tmp
            sign = -sign
        for i in range(k + 1, m):
            LU[i, k] /= LU[k, k]
            for j in range(k + 1, m):
                LU[i, j] -= LU[i, k] * LU[k, j]
    return LU, piv, sign, True


@njit
def lu_logabsdet(A):
    """log|det A| via partial-pivot LU. Returns (value, ok)."""
    LU, _, sign, ok = lu_factor(A)
    if not ok:
        return -np.inf, False
    acc = 0.0
    for k in range(A.shape[0]):
        acc += np.log(abs(LU[k, k]))
    return acc, True


@njit
def lu_solve(A, b):
    """x with A x = b for a general square A. Returns (x, ok)."""
    m = A.shape[0]
    LU, piv, _, ok = lu_factor(A)
    x = b.copy()
    if not ok:
        return x, False
    for k in range(m):
        if piv[k] != k:
            tmp = x[k]
            x[k] = x[piv[k]]
            x[piv[k]] = tmp
    for i in range(m):
        x[i] -= np.dot(LU[i, :i], x[:i])
    for i in range(m - 1, -1, -1):
        acc = x[i]
        for k in range(i + 1, m):
            acc -= LU[i, k] * x[k]
        x[i] = acc / LU[i, i]
    return x, True


def symmetrize(M):
    """Exactly symmetric copy of M ((M + M^T)/2; IEEE addition commutes)."""
    M = np.asarray(M, dtype=float)
    return (M + M.T) / 2.0


@dataclass(frozen=True)
class PdFactor:
    """Cholesky factorization L L^T of a symmetric positive-definite matrix."""

    lower: np.ndarray

    @property
    def dim(self):
        return self.lower.shape[0]

    def solve(self, b):
        """x with S x = b; b may be a vector or a matrix of columns."""
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.dim:
            raise ValueError(f"right-hand side has {b.shape[0]} rows, expected {self.dim}")
        if b.ndim == 1:
            return chol_solve(self.lower, b)
        return chol_solve_mat(self.lower, b)

    def logdet(self):
        return chol_logdet(self.lower)

    def transform(self, z):
        """L z; maps standard normal z to N(0, S)."""
        z = np.asarray(z, dtype=float)
        if z.shape[0] != self.dim:
            raise ValueError(f"vector has length {z.shape[0]}, expected {self.dim}")
        return self.lower @ z


def factorize(S, tol=PIVOT_TOL):
    """Cholesky-factorize a symmetric PD matrix.

    Args:
        S: symmetric matrix.
        tol: absolute pivot tolerance below which S is declared non-PD.

    Returns:
        PdFactor with solve/logdet/transform queries.

    Raises:
        NotPositiveDefinite: any pivot <= tol.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {S.shape}")
    L, ok = chol_lower(S, tol)
    if not ok:
        raise NotPositiveDefinite(f"pivot <= {tol:g} during Cholesky of a {S.shape[0]}x{S.shape[0]} matrix")
    return PdFactor(lower=L)


def solve_pd(F, B):
    """X with S X = B given the factorization F of S."""
    return F.solve(B)
