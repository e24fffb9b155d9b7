"""Markov transition kernels over target positions.

Involutive accept/reject, the HMC family (one kernel per integrator scheme),
the Langevin family (MALA with a constant preconditioner, MMALA, SMALA), and
the Langevin-mixture kernel that draws a branch k per transition: k = 1 is a
Langevin move, k >= 2 a k-step HMC move.  Momentum is resampled fresh at
every transition, so each kernel acts on the position marginal.

Randomness contract per transition: one uniform for the branch (mixture
only), then the m momentum/noise normals, then one acceptance uniform.
"""

from dataclasses import dataclass, field

import numpy as np

from ._jit import njit
from .geometry import divergence_core, metric_eval, metric_full_core
from .hamiltonian import hamiltonian_core
from .integrators import _SCHEME_IDS, integrate_core
from .pdlinalg import PIVOT_TOL, chol_logdet, chol_lower, chol_solve, solve_lower_t
from .targets import KIND_CONSTANT, grad_core, logpdf_core

_LOG_2PI = float(np.log(2.0 * np.pi))

_LANGEVIN_VARIANTS = ("mala", "mmala", "smala")


@dataclass
class KernelOutcome:
    next: np.ndarray
    proposal: np.ndarray
    accept_prob: float
    accepted: bool
    branch: int
    sq_jump: float
    integrator_converged: bool = True


@dataclass
class HmcSpec:
    scheme: str
    step_size: float
    n_steps: int
    fp_tol: float = 1e-10
    fp_max_iters: int = 50

    def __post_init__(self):
        if self.scheme not in _SCHEME_IDS:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.n_steps < 1:
            raise ValueError("n_steps must be a positive integer")


@dataclass
class MixtureSpec:
    alpha1: float
    k_max: int
    step_size: float
    langevin_variant: str
    scheme: str
    langevin_step_size: float | None = None
    fp_tol: float = 1e-10
    fp_max_iters: int = 50

    def __post_init__(self):
        if not 0.0 <= self.alpha1 <= 1.0:
            raise ValueError("alpha1 must lie in [0, 1]")
        if self.k_max < 2:
            raise ValueError("k_max must be an integer >= 2")
        if self.langevin_variant not in _LANGEVIN_VARIANTS:
            raise ValueError(f"unknown langevin_variant {self.langevin_variant!r}")
        if self.scheme not in _SCHEME_IDS:
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if self.langevin_step_size is not None and not self.langevin_step_size > 0:
            raise ValueError("langevin_step_size must be positive")


def mixture_weights(mix):
    """Branch probabilities (alpha_1, ..., alpha_{k_max}).

    alpha1 = 0 is the convention for the unmodified HMC kernel: uniform
    weights 1/k_max with the k=1 branch still an involutive HMC move.
    """
    if mix.alpha1 == 0.0:
        return np.full(mix.k_max, 1.0 / mix.k_max)
    w = np.full(mix.k_max, (1.0 - mix.alpha1) / (mix.k_max - 1))
    w[0] = mix.alpha1
    return w


# ---------------------------------------------------------------------------
# jit cores


@njit
def imc_accept_core(log_ratio, u):
    if np.isnan(log_ratio):
        return 0.0, False
    a = np.exp(min(0.0, log_ratio))
    return a, u < a


@njit
def hmc_transition_core(tid, kind, params, data, G_const, sa, q, z, u,
                        eps, fp_tol, fp_max_iters, k, scheme):
    """Returns (next, proposal, accept_prob, accepted, sq_jump, status).

    status: 0 ok; 1 metric failure at the current point (caller raises);
    2 integration failure (rejection, flagged).
    """
    G, _ = metric_full_core(tid, kind, params, data, G_const, sa, q, 0)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return q, q, 0.0, False, 0.0, 1
    p = np.dot(L, z)
    h0, ok0 = hamiltonian_core(tid, kind, params, data, G_const, sa, q, p)
    if not ok0:
        return q, q, 0.0, False, 0.0, 1
    q2, p2, log_jac, conv, _ = integrate_core(
        tid, kind, params, data, G_const, sa, q, p, eps, fp_tol, fp_max_iters, k, scheme
    )
    if not conv:
        return q, q2, 0.0, False, 0.0, 2
    h1, ok1 = hamiltonian_core(tid, kind, params, data, G_const, sa, q2, p2)
    if not ok1 or np.isnan(h1):
        return q, q2, 0.0, False, 0.0, 0
    alpha, accepted = imc_accept_core(-(h1 - h0) + log_jac, u)
    sq = alpha * np.sum((q2 - q) ** 2) if alpha > 0.0 else 0.0
    nxt = q2 if accepted else q
    return nxt, q2, alpha, accepted, sq, 0


@njit
def _langevin_drift(tid, kind, params, data, G_const, sa, q, eps, use_mmala):
    """Drift c_eps(q) and the metric factor at q. Returns (c, L, ok)."""
    order = 1 if use_mmala else 0
    G, dG = metric_full_core(tid, kind, params, data, G_const, sa, q, order)
    L, ok = chol_lower(G, PIVOT_TOL)
    if not ok:
        return q, L, False
    c = 0.5 * eps * eps * chol_solve(L, grad_core(tid, params, data, q))
    if use_mmala:
        c = c + 0.5 * eps * eps * divergence_core(L, dG)
    return c, L, True


@njit
def _langevin_log_density(L, eps, r):
    """log N(y | x + c, eps^2 G(x)^{-1}) with r = y - x - c and L = chol(G(x))."""
    m = r.shape[0]
    t = np.dot(L.T, r)
    return -0.5 * m * (_LOG_2PI + 2.0 * np.log(eps)) + 0.5 * chol_logdet(L) \
        - 0.5 * np.dot(t, t) / (eps * eps)


@njit
def langevin_transition_core(tid, kind, params, data, G_const, sa, q, z, u, eps, use_mmala):
    """Returns (next, proposal, accept_prob, accepted, sq_jump, status).

    status: 0 ok; 1 metric failure at the current point (caller raises).
    Metric failure at the proposal is a plain rejection.
    """
    c, L, ok = _langevin_drift(tid, kind, params, data, G_const, sa, q, eps, use_mmala)
    if not ok:
        return q, q, 0.0, False, 0.0, 1
    prop = q + c + eps * solve_lower_t(L, z)
    if not np.all(np.isfinite(prop)):
        return q, prop, 0.0, False, 0.0, 0
    c2, L2, ok2 = _langevin_drift(tid, kind, params, data, G_const, sa, prop, eps, use_mmala)
    if not ok2:
        return q, prop, 0.0, False, 0.0, 0
    log_fwd = _langevin_log_density(L, eps, prop - q - c)
    log_rev = _langevin_log_density(L2, eps, q - prop - c2)
    log_ratio = logpdf_core(tid, params, data, prop) - logpdf_core(tid, params, data, q) \
        + log_rev - log_fwd
    alpha, accepted = imc_accept_core(log_ratio, u)
    sq = alpha * np.sum((prop - q) ** 2) if alpha > 0.0 else 0.0
    nxt = prop if accepted else q
    return nxt, prop, alpha, accepted, sq, 0


# ---------------------------------------------------------------------------
# Python surface


def imc_accept(log_pi_current, log_pi_proposed, log_jacobian, rng):
    """Involutive Metropolis test: alpha = min{1, exp(dlog pi + log jac)}."""
    log_ratio = (log_pi_proposed - log_pi_current) + log_jacobian
    alpha, accepted = imc_accept_core(log_ratio, rng.random())
    return float(alpha), bool(accepted)


def _core_args(target):
    return (
        target.tid, target.metric_kind, target.params, target.data,
        target.metric_constant, target.softabs_alpha,
    )


def hmc_transition(target, q, spec, rng):
    """One marginal HMC transition: fresh momentum, k integrator steps,
    involutive accept on -dH plus the accumulated log-Jacobian."""
    q = np.asarray(q, dtype=float)
    z = rng.normal(size=target.dim)
    u = rng.random()
    nxt, prop, alpha, accepted, sq, status = hmc_transition_core(
        *_core_args(target), q, z, u,
        spec.step_size, spec.fp_tol, spec.fp_max_iters,
        spec.n_steps, _SCHEME_IDS[spec.scheme],
    )
    if status == 1:
        metric_eval(target, q, order=0)
    return KernelOutcome(
        next=nxt, proposal=prop, accept_prob=float(alpha), accepted=bool(accepted),
        branch=spec.n_steps, sq_jump=float(sq), integrator_converged=status != 2,
    )


def langevin_transition(target, q, variant, step_size, rng):
    """One Metropolis-adjusted Langevin transition.

    variant: "mala" (constant preconditioner, so the target must carry a
    constant metric), "mmala" (full drift with the metric-divergence term),
    or "smala" (divergence term dropped).
    """
    if variant not in _LANGEVIN_VARIANTS:
        raise ValueError(f"unknown langevin variant {variant!r}")
    if variant == "mala" and target.metric_kind != KIND_CONSTANT:
        raise ValueError("mala needs a constant metric; use mmala or smala")
    q = np.asarray(q, dtype=float)
    z = rng.normal(size=target.dim)
    u = rng.random()
    nxt, prop, alpha, accepted, sq, status = langevin_transition_core(
        *_core_args(target), q, z, u, step_size, variant == "mmala"
    )
    if status == 1:
        metric_eval(target, q, order=0)
    return KernelOutcome(
        next=nxt, proposal=prop, accept_prob=float(alpha), accepted=bool(accepted),
        branch=1, sq_jump=float(sq),
    )


def mixture_transition(target, q, mix, rng):
    """One transition of the Langevin-mixture kernel.

    Draws branch k with the mixture weights; k = 1 is a Langevin move when
    alpha1 > 0 and a single-step involutive HMC move under the alpha1 = 0
    convention; k >= 2 is a k-step HMC move.
    """
    w = mixture_weights(mix)
    k = int(np.searchsorted(np.cumsum(w), rng.random(), side="right")) + 1
    k = min(k, mix.k_max)
    if k == 1 and mix.alpha1 > 0.0:
        eps = mix.langevin_step_size if mix.langevin_step_size is not None else mix.step_size
        return langevin_transition(target, q, mix.langevin_variant, eps, rng)
    spec = HmcSpec(
        scheme=mix.scheme, step_size=mix.step_size, n_steps=k,
        fp_tol=mix.fp_tol, fp_max_iters=mix.fp_max_iters,
    )
    return hmc_transition(target, q, spec, rng)
