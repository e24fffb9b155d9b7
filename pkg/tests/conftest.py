import numpy as np
import pytest


def fd_gradient(f, x, h=1e-5):
    """Central finite-difference gradient of scalar f at x."""
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def fd_jacobian(f, x, h=1e-6):
    """Central finite-difference Jacobian of vector-valued f at x."""
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(f(x))
    J = np.zeros((f0.size, x.size))
    for j in range(x.size):
        e = np.zeros_like(x)
        e[j] = h
        J[:, j] = (np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * h)
    return J


def fd_matrix_derivative(matrix_fn, q, h=1e-5):
    """Central FD of a matrix-valued map; returns array of shape (m, *mat.shape)."""
    q = np.asarray(q, dtype=float)
    M0 = np.asarray(matrix_fn(q))
    out = np.zeros((q.size,) + M0.shape)
    for i in range(q.size):
        e = np.zeros_like(q)
        e[i] = h
        out[i] = (np.asarray(matrix_fn(q + e)) - np.asarray(matrix_fn(q - e))) / (2 * h)
    return out


def random_pd_matrix(rng, m, jitter=1e-3):
    """Random PD matrix A^T A + jitter*I."""
    A = rng.normal(size=(m, m))
    return A.T @ A + jitter * np.eye(m)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
