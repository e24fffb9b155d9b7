"""Riemannian Hamiltonian, its partial gradients, and momentum resampling.

H(q, p) = -log pi(q) + 1/2 log det G(q) + 1/2 p^T G(q)^{-1} p, with log pi
unnormalized throughout; kernels only ever use differences of H.
"""

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .geometry import NonFinite, metric_eval, metric_full_core
from .pdlinalg import PIVOT_TOL, chol_logdet, chol_lower, chol_solve, chol_solve_mat
from .targets import grad_core, logpdf_core


@dataclass
class PhaseState:
    """Position and momentum in R^m."""

    q: np.ndarray
    p: np.ndarray

    def copy(self):
        return PhaseState(q=self.q.copy(), p=self.p.copy())


# --------------------------------------------------------------------------
# jit cores (ok=False signals a metric factorization failure)


@njit
def hamiltonian_core(tid, kind, params, data, G_const, sa, q, p):
    G, _ = metric_full_core(tid, kind, params, data, G_const, sa, q, 0)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return np.inf, False
    w = chol_solve(L, p)
    h = -logpdf_core(tid, params, data, q) + 0.5 * chol_logdet(L) + 0.5 * np.dot(p, w)
    return h, True


@njit
def grad_q_h_core(tid, kind, params, data, G_const, sa, q, p):
    m = q.shape[0]
    g = np.zeros(m)
    G, dG = metric_full_core(tid, kind, params, data, G_const, sa, q, 1)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return g, False
    glp = grad_core(tid, params, data, q)
    w = chol_solve(L, p)
    for i in range(m):
        # trace via the factorization, not an explicit inverse
        S = chol_solve_mat(L, dG[i])
        tr = 0.0
        for j in range(m):
            tr += S[j, j]
        g[i] = -glp[i] + 0.5 * tr - 0.5 * np.dot(w, np.dot(dG[i], w))
    return g, True


@njit
def grad_p_h_core(tid, kind, params, data, G_const, sa, q, p):
    G, _ = metric_full_core(tid, kind, params, data, G_const, sa, q, 0)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return np.zeros(q.shape[0]), False
    return chol_solve(L, p), True


@njit
def lagrangian_u_core(tid, kind, params, data, G_const, sa, q):
    """U = -log pi + 1/2 log det G and its gradient. Returns (val, grad, ok)."""
    m = q.shape[0]
    grad = np.zeros(m)
    G, dG = metric_full_core(tid, kind, params, data, G_const, sa, q, 1)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return np.inf, grad, False
    val = -logpdf_core(tid, params, data, q) + 0.5 * chol_logdet(L)
    glp = grad_core(tid, params, data, q)
    for i in range(m):
        S = chol_solve_mat(L, dG[i])
        tr = 0.0
        for j in range(m):
            tr += S[j, j]
        grad[i] = -glp[i] + 0.5 * tr
    return val, grad, True


def _core_args(target):
    return (
        target.tid, target.metric_kind, target.params, target.data,
        target.metric_constant, target.softabs_alpha,
    )


# --------------------------------------------------------------------------
# Python surface


def hamiltonian(target, q, p):
    """H(q, p) up to the target's additive normalization constant."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    me = metric_eval(target, q, order=0)  # raises on non-PD / non-finite
    h = -target.log_density(q) + 0.5 * me.factor.logdet() + 0.5 * float(p @ me.factor.solve(p))
    if np.isnan(h):
        raise NonFinite(f"Hamiltonian is NaN at q={q}")
    return h


def grad_q_hamiltonian(target, q, p):
    """dH/dq: -grad log pi + 1/2 tr(G^{-1} dG_i) - 1/2 p^T G^{-1} dG_i G^{-1} p."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NonFinite("non-finite phase state")
    g, ok = grad_q_h_core(*_core_args(target), q, p)
    if not ok:
        metric_eval(target, q, order=0)  # reraise with the right error
    return g


def grad_p_hamiltonian(target, q, p):
    """dH/dp = G(q)^{-1} p."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    g, ok = grad_p_h_core(*_core_args(target), q, p)
    if not ok:
        metric_eval(target, q, order=0)
    return g


def lagrangian_potential(target, q):
    """(U, grad U) with U = -log pi + 1/2 log det G."""
    q = np.asarray(q, dtype=float)
    val, grad, ok = lagrangian_u_core(*_core_args(target), q)
    if not ok:
        metric_eval(target, q, order=0)
    return float(val), grad


def sample_momentum(target, q, rng):
    """p ~ N(0, G(q)): the Cholesky factor applied to fresh standard normals."""
    me = metric_eval(target, np.asarray(q, dtype=float), order=0)
    z = rng.normal(size=target.dim)
    return me.factor.transform(z)
