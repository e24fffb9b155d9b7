"""Leapfrog maps on the phase space (q, p).

Three schemes: Euclidean (explicit, constant metric), generalized (implicit,
Picard fixed points, symplectic), and Lagrangian (explicit via m-by-m linear
solves, volume-correcting log-Jacobian).  `integrate` composes k steps and
applies the momentum flip F(q, p) = (q, -p), making the composite map an
involution on converged trajectories.
"""

from dataclasses import dataclass

import numpy as np

from ._jit import njit
from .geometry import NonFinite, christoffel_core, metric_eval, metric_full_core, omega_core
from .hamiltonian import PhaseState
from .pdlinalg import (
    PIVOT_TOL,
    chol_logdet,
    chol_lower,
    chol_solve,
    chol_solve_mat,
    lu_logabsdet,
    lu_solve,
)
from .targets import grad_core

SCHEME_EUCLIDEAN = 0
SCHEME_GENERALIZED = 1
SCHEME_LAGRANGIAN = 2

_SCHEME_IDS = {
    "euclidean": SCHEME_EUCLIDEAN,
    "generalized": SCHEME_GENERALIZED,
    "lagrangian": SCHEME_LAGRANGIAN,
}


class SingularUpdate(Exception):
    """A velocity system (I +/- (eps/2) Omega) was singular; step size too large."""


@dataclass
class IntegratorConfig:
    step_size: float
    fp_tol: float = 1e-10
    fp_max_iters: int = 50

    def __post_init__(self):
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iters < 1:
            raise ValueError("fp_max_iters must be a positive integer")


@dataclass
class StepResult:
    state: PhaseState
    log_jacobian: float
    converged: bool
    fp_iters_used: int


# ---------------------------------------------------------------------------
# jit cores.  Shared by the Python step functions and the sampler transition
# cores.  Failures are status codes, not exceptions.


@njit
def _grad_potential(tid, kind, params, data, G_const, sa, q, L, dG):
    """grad of U = -log pi + (1/2) log det G given the factor at q."""
    m = q.shape[0]
    glp = grad_core(tid, params, data, q)
    a = np.empty(m)
    for i in range(m):
        S = chol_solve_mat(L, dG[i])
        tr = 0.0
        for j in range(m):
            tr += S[j, j]
        a[i] = -glp[i] + 0.5 * tr
    return a


@njit
def euclidean_step_core(tid, kind, params, data, G_const, sa, q, p, eps):
    """One Euclidean leapfrog step. Returns (q2, p2, ok)."""
    G, _ = metric_full_core(tid, kind, params, data, G_const, sa, q, 0)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return q, p, False
    ph = p + 0.5 * eps * grad_core(tid, params, data, q)
    q2 = q + eps * chol_solve(L, ph)
    p2 = ph + 0.5 * eps * grad_core(tid, params, data, q2)
    return q2, p2, True


@njit
def generalized_step_core(tid, kind, params, data, G_const, sa, q, p, eps, fp_tol, fp_max_iters):
    """One generalized leapfrog step. Returns (q2, p2, converged, iters).

    iters is the larger Picard iteration count of the two implicit solves.
    """
    m = q.shape[0]
    G, dG = metric_full_core(tid, kind, params, data, G_const, sa, q, 1)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return q, p, False, 0
    a = _grad_potential(tid, kind, params, data, G_const, sa, q, L, dG)

    # implicit momentum half-step: ph = p - (eps/2) dH/dq(q, ph)
    ph = p.copy()
    iters_p = 0
    done = False
    for it in range(fp_max_iters):
        w = chol_solve(L, ph)
        gq = np.empty(m)
        for i in range(m):
            gq[i] = a[i] - 0.5 * np.dot(w, np.dot(dG[i], w))
        ph_new = p - 0.5 * eps * gq
        iters_p = it + 1
        diff = np.max(np.abs(ph_new - ph))
        ph = ph_new
        if diff < fp_tol:
            done = True
            break
    if not done:
        return q, p, False, iters_p

    # implicit position half-step: qt = q + (eps/2)(G^-1(q) + G^-1(qt)) ph
    w0 = chol_solve(L, ph)
    qt = q.copy()
    iters_q = 0
    done = False
    for it in range(fp_max_iters):
        G2, _ = metric_full_core(tid, kind, params, data, G_const, sa, qt, 0)
        L2, ok2 = chol_lower(G2, PIVOT_TOL)
        if not ok2:
            return q, p, False, max(iters_p, it + 1)
        qt_new = q + 0.5 * eps * (w0 + chol_solve(L2, ph))
        iters_q = it + 1
        diff = np.max(np.abs(qt_new - qt))
        qt = qt_new
        if diff < fp_tol:
            done = True
            break
    if not done:
        return q, p, False, max(iters_p, iters_q)

    # explicit momentum half-step at qt
    G3, dG3 = metric_full_core(tid, kind, params, data, G_const, sa, qt, 1)
    L3, ok3 = chol_lower(G3, PIVOT_TOL)
    if not ok3:
        return q, p, False, max(iters_p, iters_q)
    a3 = _grad_potential(tid, kind, params, data, G_const, sa, qt, L3, dG3)
    w = chol_solve(L3, ph)
    gq = np.empty(m)
    for i in range(m):
        gq[i] = a3[i] - 0.5 * np.dot(w, np.dot(dG3[i], w))
    p2 = ph - 0.5 * eps * gq
    return qt, p2, True, max(iters_p, iters_q)


@njit
def lagrangian_step_core(tid, kind, params, data, G_const, sa, q, p, eps):
    """One Lagrangian leapfrog step. Returns (q2, p2, log_jac, code).

    code: 0 ok; 1 metric failure at q; 2 singular first velocity system;
    3 metric failure at the new position (q2 holds it); 4 singular second
    velocity system.  The log-Jacobian follows the sub-step chain rule:
    each implicit velocity solve contributes det(I - (eps/2) Omega(., out))
    over det(I + (eps/2) Omega(., in)), and the Legendre transforms at entry
    and exit contribute det G(q2) / det G(q).
    """
    m = q.shape[0]
    eye = np.eye(m)
    G, dG = metric_full_core(tid, kind, params, data, G_const, sa, q, 1)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return q, p, 0.0, 1
    a = _grad_potential(tid, kind, params, data, G_const, sa, q, L, dG)
    gamma = christoffel_core(L, dG)
    v = chol_solve(L, p)

    M1 = eye + 0.5 * eps * omega_core(gamma, v)
    rhs = v - 0.5 * eps * chol_solve(L, a)
    vb, ok1 = lu_solve(M1, rhs)
    if not ok1:
        return q, p, 0.0, 2
    ld1, _ = lu_logabsdet(M1)
    ld2, ok2 = lu_logabsdet(eye - 0.5 * eps * omega_core(gamma, vb))
    if not ok2:
        return q, p, 0.0, 2

    qt = q + eps * vb
    G2, dG2 = metric_full_core(tid, kind, params, data, G_const, sa, qt, 1)
    L2, okm = chol_lower(G2, PIVOT_TOL)
    if not okm:
        return qt, p, 0.0, 3
    a2 = _grad_potential(tid, kind, params, data, G_const, sa, qt, L2, dG2)
    gamma2 = christoffel_core(L2, dG2)

    M3 = eye + 0.5 * eps * omega_core(gamma2, vb)
    rhs2 = vb - 0.5 * eps * chol_solve(L2, a2)
    vt, ok3 = lu_solve(M3, rhs2)
    if not ok3:
        return qt, p, 0.0, 4
    ld3, _ = lu_logabsdet(M3)
    ld4, ok4 = lu_logabsdet(eye - 0.5 * eps * omega_core(gamma2, vt))
    if not ok4:
        return qt, p, 0.0, 4

    p2 = np.dot(G2, vt)
    log_jac = chol_logdet(L2) - chol_logdet(L) + ld2 + ld4 - ld1 - ld3
    return qt, p2, log_jac, 0


@njit
def integrate_core(tid, kind, params, data, G_const, sa, q, p, eps, fp_tol, fp_max_iters, k, scheme):
    """k steps of the given scheme then the momentum flip.

    Returns (q2, p2, log_jac, converged, iters).  The first failing step
    aborts the composition; the pre-failure state is returned unflipped.
    """
    log_jac = 0.0
    iters = 0
    for _ in range(k):
        if scheme == SCHEME_EUCLIDEAN:
            q, p, ok = euclidean_step_core(tid, kind, params, data, G_const, sa, q, p, eps)
            if not ok:
                return q, p, log_jac, False, iters
        elif scheme == SCHEME_GENERALIZED:
            q, p, ok, it = generalized_step_core(
                tid, kind, params, data, G_const, sa, q, p, eps, fp_tol, fp_max_iters
            )
            iters = max(iters, it)
            if not ok:
                return q, p, log_jac, False, iters
        else:
            q, p, lj, code = lagrangian_step_core(tid, kind, params, data, G_const, sa, q, p, eps)
            if code != 0:
                return q, p, log_jac, False, iters
            log_jac += lj
        if not np.all(np.isfinite(q)) or not np.all(np.isfinite(p)):
            return q, p, log_jac, False, iters
    return q, -p, log_jac, True, iters


# ---------------------------------------------------------------------------
# Python surface


def _core_args(target):
    return (
        target.tid, target.metric_kind, target.params, target.data,
        target.metric_constant, target.softabs_alpha,
    )


def _check_state(s):
    if not (np.all(np.isfinite(s.q)) and np.all(np.isfinite(s.p))):
        raise NonFinite("non-finite phase state")


def euclidean_leapfrog_step(target, s, cfg):
    """Explicit leapfrog for a constant-metric target."""
    _check_state(s)
    q, p, ok = euclidean_step_core(*_core_args(target), s.q, s.p, cfg.step_size)
    if not ok:
        metric_eval(target, s.q, order=0)
    if not (np.all(np.isfinite(q)) and np.all(np.isfinite(p))):
        raise NonFinite("leapfrog step left the target's domain")
    return StepResult(state=PhaseState(q=q, p=p), log_jacobian=0.0, converged=True, fp_iters_used=0)


def generalized_leapfrog_step(target, s, cfg):
    """Implicit leapfrog for position-dependent metrics.

    Fixed-point failure is reported through converged=False, never raised;
    callers treat it as a rejected proposal.
    """
    _check_state(s)
    q, p, ok, iters = generalized_step_core(
        *_core_args(target), s.q, s.p, cfg.step_size, cfg.fp_tol, cfg.fp_max_iters
    )
    return StepResult(
        state=PhaseState(q=q, p=p), log_jacobian=0.0, converged=bool(ok), fp_iters_used=iters
    )


def lagrangian_leapfrog_step(target, s, cfg):
    """Explicit velocity-space leapfrog with its volume correction."""
    _check_state(s)
    q, p, log_jac, code = lagrangian_step_core(*_core_args(target), s.q, s.p, cfg.step_size)
    if code == 1:
        metric_eval(target, s.q, order=0)
    if code in (2, 4):
        raise SingularUpdate(f"singular velocity update at step_size={cfg.step_size}")
    if code == 3:
        metric_eval(target, q, order=0)
    return StepResult(
        state=PhaseState(q=q, p=p), log_jacobian=float(log_jac), converged=True, fp_iters_used=0
    )


def integrate(target, s, cfg, k, scheme):
    """k steps of `scheme` followed by the momentum flip.

    All failure modes (fixed-point non-convergence, singular velocity
    systems, leaving the metric's domain) surface as converged=False.
    """
    if scheme not in _SCHEME_IDS:
        raise ValueError(f"unknown scheme {scheme!r}; expected one of {sorted(_SCHEME_IDS)}")
    if k < 1:
        raise ValueError("k must be a positive integer")
    _check_state(s)
    q, p, log_jac, ok, iters = integrate_core(
        *_core_args(target), s.q, s.p, cfg.step_size, cfg.fp_tol, cfg.fp_max_iters,
        k, _SCHEME_IDS[scheme],
    )
    return StepResult(
        state=PhaseState(q=q, p=p), log_jacobian=float(log_jac),
        converged=bool(ok), fp_iters_used=iters,
    )
