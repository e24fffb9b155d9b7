"""Position-dependent metric machinery.

Metric evaluation with derivatives, Christoffel symbols, the velocity
contraction Omega, the divergence drift used by the manifold Langevin
proposal, and the SoftAbs map from Hessians to PD metrics.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._jit import njit
from .pdlinalg import PdFactor, chol_lower, chol_solve, chol_solve_mat, factorize
from .targets import (
    KIND_ANALYTIC,
    KIND_CONSTANT,
    KIND_SOFTABS,
    funnel_neg_log_density_hessian,
    metric_core,
)


class NonFinite(Exception):
    """Target or metric evaluated outside its domain (NaN/inf entries)."""


class EigenFailure(Exception):
    """Symmetric eigensolver failed to converge."""


# --------------------------------------------------------------------------
# SoftAbs: G = Q diag(lam * coth(alpha*lam)) Q^T


@njit
def _softabs_s(lam, alpha):
    """lam * coth(alpha * lam), smooth and >= 1/alpha for all real lam."""
    u = alpha * lam
    if abs(u) < 1e-4:
        return (1.0 + u * u / 3.0 - u**4 / 45.0) / alpha
    return lam / np.tanh(u)


@njit
def _softabs_s_prime(lam, alpha):
    u = alpha * lam
    if abs(u) < 1e-4:
        return 2.0 * u / 3.0 - 4.0 * u**3 / 45.0
    c = 1.0 / np.tanh(u)
    return c + u * (1.0 - c * c)


@njit
def softabs_core(H, dH, alpha, order):
    m = H.shape[0]
    lam, Q = np.linalg.eigh(H)
    s = np.zeros(m)
    for i in range(m):
        s[i] = _softabs_s(lam[i], alpha)
    G = np.dot(Q * s, Q.T)
    G = (G + G.T) / 2.0
    n_d = dH.shape[0]
    dG = np.zeros((n_d, m, m))
    if order >= 1 and n_d > 0:
        # divided differences of s; derivative at the midpoint for near-ties
        R = np.zeros((m, m))
        for j in range(m):
            for k in range(m):
                if abs(lam[j] - lam[k]) < 1e-8:
                    R[j, k] = _softabs_s_prime(0.5 * (lam[j] + lam[k]), alpha)
                else:
                    R[j, k] = (s[j] - s[k]) / (lam[j] - lam[k])
        for i in range(n_d):
            B = np.dot(Q.T, np.dot(dH[i], Q))
            T = np.dot(Q, np.dot(R * B, Q.T))
            dG[i] = (T + T.T) / 2.0
    return G, dG


# --------------------------------------------------------------------------
# metric dispatch over policies


@njit
def metric_full_core(tid, metric_kind, params, data, G_const, softabs_alpha, q, order):
    m = q.shape[0]
    if metric_kind == KIND_CONSTANT:
        G = G_const.copy()
        dG = np.zeros((m, m, m)) if order >= 1 else np.zeros((0, m, m))
        return G, dG
    elif metric_kind == KIND_ANALYTIC:
        return metric_core(tid, params, data, q, order)
    else:  # KIND_SOFTABS
        H, dH = funnel_neg_log_density_hessian(q, order)
        return softabs_core(H, dH, softabs_alpha, order)


@njit
def christoffel_core(L, dG):
    """gamma[i, k, j] = Gamma^i_kj from the Cholesky factor of G and dG."""
    m = L.shape[0]
    gamma = np.zeros((m, m, m))
    rhs = np.zeros(m)
    for j in range(m):
        for k in range(m):
            for l in range(m):
                rhs[l] = 0.5 * (dG[j, l, k] + dG[k, j, l] - dG[l, j, k])
            gamma[:, j, k] = chol_solve(L, rhs)
    return gamma


@njit
def omega_core(gamma, v):
    m = v.shape[0]
    Om = np.zeros((m, m))
    for i in range(m):
        for j in range(m):
            acc = 0.0
            for k in range(m):
                acc += gamma[i, k, j] * v[k]
            Om[i, j] = acc
    return Om


@njit
def divergence_core(L, dG):
    """drift_i = sum_j dA_ij/dq_j with A = G^{-1}, via dA/dq_j = -A dG_j A."""
    m = L.shape[0]
    A = chol_solve_mat(L, np.eye(m))
    drift = np.zeros(m)
    for j in range(m):
        M = np.dot(A, np.dot(dG[j], A))
        for i in range(m):
            drift[i] -= M[i, j]
    return drift


# --------------------------------------------------------------------------
# Python surface


@dataclass(frozen=True)
class MetricEval:
    """Metric G(q), its Cholesky factor, and (order >= 1) the derivatives dG/dq_i."""

    q: np.ndarray
    G: np.ndarray
    factor: PdFactor
    dG: Optional[np.ndarray] = None


def metric_eval(target, q, order=1):
    """Evaluate the target's metric policy at q.

    Args:
        target: TargetModel supplying the policy.
        q: position.
        order: 0 for G only, 1 to include all m derivative matrices.

    Raises:
        NonFinite: q or any metric entry is NaN/inf.
        NotPositiveDefinite: the metric fails its Cholesky factorization.
    """
    q = np.asarray(q, dtype=float)
    if not np.all(np.isfinite(q)):
        raise NonFinite(f"position contains non-finite entries: {q}")
    G, dG = metric_full_core(
        target.tid, target.metric_kind, target.params, target.data,
        target.metric_constant, target.softabs_alpha, q, order,
    )
    if not np.all(np.isfinite(G)):
        raise NonFinite(f"metric non-finite at q={q}")
    return MetricEval(q=q, G=G, factor=factorize(G), dG=dG if order >= 1 else None)


def christoffel(me):
    """Second-kind Christoffel symbols gamma[i, k, j] = Gamma^i_kj at me.q.

    Standard convention: Gamma^i_jk = 1/2 sum_l (G^{-1})_il (d_j G_lk + d_k G_jl - d_l G_jk),
    symmetric in the two lower indices.
    """
    if me.dG is None:
        raise ValueError("christoffel needs metric derivatives (order >= 1)")
    return christoffel_core(me.factor.lower, me.dG)


def omega(gamma, v):
    """Omega_ij(q, v) = sum_k Gamma^i_kj v_k."""
    return omega_core(gamma, np.asarray(v, dtype=float))


def divergence_drift(target, q):
    """Row divergence of A = G^{-1}: drift_i = sum_j dA_ij/dq_j."""
    me = metric_eval(target, q, order=1)
    return divergence_core(me.factor.lower, me.dG)


def softabs_metric(hessian, d_hessian, alpha):
    """SoftAbs-transform a symmetric matrix into a PD metric.

    Args:
        hessian: symmetric m x m matrix H.
        d_hessian: stack of k symmetric matrices dH/dq_i (may be empty).
        alpha: sharpness; the metric eigenvalues are lam_i * coth(alpha*lam_i).

    Returns:
        (G, dG) with dG empty when d_hessian is empty.
    """
    H = np.asarray(hessian, dtype=float)
    dH = np.asarray(d_hessian, dtype=float)
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    try:
        return softabs_core(H, dH, float(alpha), 1 if dH.shape[0] else 0)
    except np.linalg.LinAlgError as exc:
        raise EigenFailure(str(exc)) from exc
