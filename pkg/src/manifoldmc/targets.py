"""Benchmark posteriors packaged as TargetModel instances.

Each target supplies an unnormalized log-density, its analytic gradient, a
metric policy, and (where available) an i.i.d. reference sampler.  Density,
gradient, and metric formulas are numba cores dispatching on an integer
target id so the transition kernels can run fully compiled.
"""

import csv
import dataclasses
from dataclasses import dataclass, field
from importlib import resources
from typing import Callable, Optional

import numpy as np

from ._jit import njit
from .pdlinalg import symmetrize

# target ids for the jit dispatch
TID_GAUSS = 0
TID_BANANA = 1
TID_FUNNEL = 2
TID_STUDENT = 3
TID_LOGISTIC = 4
TID_EXPTOY = 5

# metric kinds
KIND_CONSTANT = 0
KIND_ANALYTIC = 1
KIND_SOFTABS = 2

_NO_DATA = np.zeros((0, 0))


# --------------------------------------------------------------------------
# log-density and gradient cores


@njit
def logpdf_core(tid, params, data, q):
    if tid == TID_GAUSS:
        P = data
        return -0.5 * np.dot(q, np.dot(P, q))
    elif tid == TID_BANANA:
        sy2 = params[1] * params[1]
        st2 = params[2] * params[2]
        mu = q[0] + q[1] * q[1]
        ss = params[4] - 2.0 * mu * params[3] + params[0] * mu * mu
        return -0.5 * np.dot(q, q) / st2 - 0.5 * ss / sy2
    elif tid == TID_FUNNEL:
        n = params[0]
        v = q[0]
        sumx2 = np.dot(q[1:], q[1:])
        return -v * v / 18.0 + 0.5 * n * v - 0.5 * np.exp(v) * sumx2
    elif tid == TID_STUDENT:
        m = q.shape[0]
        nu = params[0]
        s = 0.0
        for i in range(m):
            s += q[i] * q[i] / params[1 + i]
        return -0.5 * (m + nu) * np.log(1.0 + s / nu)
    elif tid == TID_LOGISTIC:
        m = q.shape[0]
        alpha = params[0]
        X = data[:, :m]
        y = data[:, m]
        acc = 0.0
        for i in range(X.shape[0]):
            z = np.dot(X[i], q)
            # softplus(z) = log(1+e^z) evaluated overflow-free
            sp = np.log1p(np.exp(-abs(z))) + max(z, 0.0)
            acc += y[i] * z - sp
        return acc - 0.5 * alpha * np.dot(q, q)
    else:  # TID_EXPTOY
        return 0.0


@njit
def grad_core(tid, params, data, q):
    m = q.shape[0]
    g = np.zeros(m)
    if tid == TID_GAUSS:
        g = -np.dot(data, q)
    elif tid == TID_BANANA:
        sy2 = params[1] * params[1]
        st2 = params[2] * params[2]
        mu = q[0] + q[1] * q[1]
        resid = (params[3] - params[0] * mu) / sy2
        g[0] = -q[0] / st2 + resid
        g[1] = -q[1] / st2 + resid * 2.0 * q[1]
    elif tid == TID_FUNNEL:
        n = params[0]
        v = q[0]
        ev = np.exp(v)
        g[0] = -v / 9.0 + 0.5 * n - 0.5 * ev * np.dot(q[1:], q[1:])
        for i in range(1, m):
            g[i] = -ev * q[i]
    elif tid == TID_STUDENT:
        nu = params[0]
        s = 0.0
        for i in range(m):
            s += q[i] * q[i] / params[1 + i]
        c = (m + nu) / (nu + s)
        for i in range(m):
            g[i] = -c * q[i] / params[1 + i]
    elif tid == TID_LOGISTIC:
        alpha = params[0]
        X = data[:, :m]
        y = data[:, m]
        for i in range(X.shape[0]):
            z = np.dot(X[i], q)
            s = 1.0 / (1.0 + np.exp(-z))
            r = y[i] - s
            for j in range(m):
                g[j] += X[i, j] * r
        g -= alpha * q
    # TID_EXPTOY: zero gradient
    return g


# --------------------------------------------------------------------------
# analytic metric cores (policies fisher-plus-prior and hessian-pd-term)


@njit
def metric_core(tid, params, data, q, order):
    """G(q) and, when order >= 1, dG[i] = dG/dq_i for the analytic-metric targets."""
    m = q.shape[0]
    G = np.zeros((m, m))
    dG = np.zeros((m, m, m)) if order >= 1 else np.zeros((0, m, m))
    if tid == TID_BANANA:
        c = params[0] / (params[1] * params[1])
        pr = 1.0 / (params[2] * params[2])
        t2 = q[1]
        G[0, 0] = c + pr
        G[0, 1] = c * 2.0 * t2
        G[1, 0] = G[0, 1]
        G[1, 1] = c * 4.0 * t2 * t2 + pr
        if order >= 1:
            dG[1, 0, 1] = 2.0 * c
            dG[1, 1, 0] = 2.0 * c
            dG[1, 1, 1] = 8.0 * c * t2
    elif tid == TID_STUDENT:
        nu = params[0]
        s = 0.0
        for i in range(m):
            s += q[i] * q[i] / params[1 + i]
        c = (m + nu) / (nu + s)
        for i in range(m):
            G[i, i] = c / params[1 + i]
        if order >= 1:
            c2 = (m + nu) / ((nu + s) * (nu + s))
            for k in range(m):
                dk = -2.0 * c2 * q[k] / params[1 + k]
                for i in range(m):
                    dG[k, i, i] = dk / params[1 + i]
    elif tid == TID_LOGISTIC:
        alpha = params[0]
        X = data[:, :m]
        n = X.shape[0]
        w = np.zeros(n)
        u = np.zeros(n)
        for i in range(n):
            z = np.dot(X[i], q)
            s = 1.0 / (1.0 + np.exp(-z))
            w[i] = s * (1.0 - s)
            u[i] = w[i] * (1.0 - 2.0 * s)
        for i in range(n):
            for a in range(m):
                wxa = w[i] * X[i, a]
                for b in range(a, m):
                    G[a, b] += wxa * X[i, b]
        for a in range(m):
            for b in range(a, m):
                G[b, a] = G[a, b]
            G[a, a] += alpha
        if order >= 1:
            for k in range(m):
                for i in range(n):
                    cik = u[i] * X[i, k]
                    for a in range(m):
                        xa = cik * X[i, a]
                        for b in range(a, m):
                            dG[k, a, b] += xa * X[i, b]
                for a in range(m):
                    for b in range(a, m):
                        dG[k, b, a] = dG[k, a, b]
    elif tid == TID_EXPTOY:
        G[0, 0] = np.exp(q[0])
        if order >= 1:
            dG[0, 0, 0] = np.exp(q[0])
    elif tid == TID_GAUSS:
        G = data.copy()
    return G, dG


@njit
def funnel_neg_log_density_hessian(q, order):
    """Hessian of -log pi for the funnel and, when order >= 1, its q-derivatives."""
    m = q.shape[0]
    v = q[0]
    ev = np.exp(v)
    sumx2 = np.dot(q[1:], q[1:])
    H = np.zeros((m, m))
    H[0, 0] = 1.0 / 9.0 + 0.5 * ev * sumx2
    for i in range(1, m):
        H[0, i] = ev * q[i]
        H[i, 0] = ev * q[i]
        H[i, i] = ev
    dH = np.zeros((m, m, m)) if order >= 1 else np.zeros((0, m, m))
    if order >= 1:
        dH[0, 0, 0] = 0.5 * ev * sumx2
        for i in range(1, m):
            dH[0, 0, i] = ev * q[i]
            dH[0, i, 0] = ev * q[i]
            dH[0, i, i] = ev
            dH[i, 0, 0] = ev * q[i]
            dH[i, 0, i] = ev
            dH[i, i, 0] = ev
    return H, dH


# --------------------------------------------------------------------------
# TargetModel


@dataclass(frozen=True)
class TargetModel:
    """A posterior: unnormalized log-density, gradient, metric policy, reference sampler."""

    name: str
    dim: int
    tid: int
    params: np.ndarray
    data: np.ndarray
    metric_policy: str
    metric_kind: int
    metric_constant: np.ndarray = field(default_factory=lambda: _NO_DATA)
    softabs_alpha: float = 0.0
    reference_sampler: Optional[Callable] = None
    init_point: Optional[np.ndarray] = None
    gibbs: Optional[tuple] = None  # (omega, theta) for the logistic alpha update

    def log_density(self, q):
        return float(logpdf_core(self.tid, self.params, self.data, np.asarray(q, dtype=float)))

    def grad_log_density(self, q):
        return grad_core(self.tid, self.params, self.data, np.asarray(q, dtype=float))

    def default_init(self):
        if self.init_point is not None:
            return self.init_point.copy()
        return np.zeros(self.dim)


def with_constant_metric(target, G):
    """Copy of target using the constant metric G (Euclidean kernels)."""
    G = symmetrize(np.asarray(G, dtype=float))
    if G.shape != (target.dim, target.dim):
        raise ValueError(f"metric shape {G.shape} does not match dim {target.dim}")
    return dataclasses.replace(target, metric_policy="constant", metric_kind=KIND_CONSTANT, metric_constant=G)


# --------------------------------------------------------------------------
# constructors


def make_gaussian(precision):
    """Gaussian with the given precision matrix; constant Fisher metric = precision."""
    P = np.asarray(precision, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ValueError(f"precision must be square, got {P.shape}")
    if not np.array_equal(P, P.T):
        raise ValueError("precision must be symmetric")
    m = P.shape[0]
    L = np.linalg.cholesky(P)

    def sampler(rng, n):
        z = rng.normal(size=(n, m))
        # x = L^{-T} z has covariance P^{-1}
        return np.linalg.solve(L.T, z.T).T

    return TargetModel(
        name="gaussian",
        dim=m,
        tid=TID_GAUSS,
        params=np.zeros(0),
        data=P,
        metric_policy="constant",
        metric_kind=KIND_CONSTANT,
        metric_constant=P,
        reference_sampler=sampler,
    )


_BANANA_GRID_CACHE = {}
_BANANA_GRID_N = 2048


def _banana_grid(params):
    """Normalized grid mass over [-6 sigma_theta, 6 sigma_theta]^2, cached."""
    key = tuple(params)
    if key not in _BANANA_GRID_CACHE:
        n_grid = _BANANA_GRID_N
        st = params[2]
        lo, hi = -6.0 * st, 6.0 * st
        width = (hi - lo) / n_grid
        centers = lo + (np.arange(n_grid) + 0.5) * width
        sy2 = params[1] ** 2
        st2 = st**2
        mu = centers[:, None] + (centers**2)[None, :]
        logp = (
            -(centers**2)[:, None] / (2 * st2)
            - (centers**2)[None, :] / (2 * st2)
            - (params[4] - 2 * mu * params[3] + params[0] * mu * mu) / (2 * sy2)
        )
        logp -= logp.max()
        mass = np.exp(logp).ravel()
        mass /= mass.sum()
        _BANANA_GRID_CACHE[key] = (np.cumsum(mass), mass, centers, width)
    return _BANANA_GRID_CACHE[key]


def banana_grid_mean(target):
    """Posterior mean from the grid mass (quadrature route, no sampling)."""
    _, mass, centers, _ = _banana_grid(tuple(target.params))
    n_grid = centers.size
    mass2 = mass.reshape(n_grid, n_grid)
    return np.array([mass2.sum(axis=1) @ centers, mass2.sum(axis=0) @ centers])


def make_banana(N, sigma_y, sigma_theta, data=None, seed=None):
    """Banana-shaped posterior: y ~ N(theta1 + theta2^2, sigma_y^2), theta ~ N(0, sigma_theta^2 I).

    Args:
        N: number of observations.
        sigma_y: observation noise scale.
        sigma_theta: prior scale.
        data: observation vector of length N; generated when omitted.
        seed: rng seed for generated observations (mean 1, sd sigma_y).
    """
    if data is None:
        gen = np.random.default_rng(0 if seed is None else seed)
        data = gen.normal(1.0, sigma_y, size=N)
    y = np.asarray(data, dtype=float)
    if y.size != N:
        raise ValueError(f"expected {N} observations, got {y.size}")
    params = np.array([float(N), float(sigma_y), float(sigma_theta), y.sum(), np.dot(y, y)])

    def sampler(rng, n):
        cdf, _, centers, width = _banana_grid(tuple(params))
        idx = np.searchsorted(cdf, rng.random(n))
        i, j = np.divmod(idx, centers.size)
        jitter = rng.random((n, 2)) - 0.5
        return np.column_stack([centers[i], centers[j]]) + jitter * width

    return TargetModel(
        name="banana",
        dim=2,
        tid=TID_BANANA,
        params=params,
        data=y.reshape(-1, 1),
        metric_policy="fisher-plus-prior",
        metric_kind=KIND_ANALYTIC,
        reference_sampler=sampler,
    )


def make_funnel(N, softabs_alpha=1e6):
    """Neal-style funnel: v ~ N(0, 9), x_i | v ~ N(0, e^{-v}); SoftAbs metric."""
    if N < 1:
        raise ValueError("N must be >= 1")

    def sampler(rng, n):
        v = 3.0 * rng.normal(size=n)
        x = rng.normal(size=(n, N)) * np.exp(-v / 2.0)[:, None]
        return np.column_stack([v, x])

    return TargetModel(
        name="funnel",
        dim=N + 1,
        tid=TID_FUNNEL,
        params=np.array([float(N), float(softabs_alpha)]),
        data=_NO_DATA,
        metric_policy="softabs",
        metric_kind=KIND_SOFTABS,
        softabs_alpha=float(softabs_alpha),
        reference_sampler=sampler,
    )


def make_student_t(m, nu, sigma_diag):
    """Multiscale Student-t with diagonal scale matrix; metric is the PD term of the Hessian."""
    if nu <= 2:
        raise ValueError("nu must exceed 2 for finite covariance")
    sigma = np.asarray(sigma_diag, dtype=float)
    if sigma.size != m or np.any(sigma <= 0):
        raise ValueError("sigma_diag must hold m positive variances")
    params = np.concatenate([[float(nu)], sigma])
    root = np.sqrt(sigma)

    def sampler(rng, n):
        z = rng.normal(size=(n, m)) * root[None, :]
        w = rng.chisquare(nu, size=n)
        return z * np.sqrt(nu / w)[:, None]

    return TargetModel(
        name="student_t",
        dim=m,
        tid=TID_STUDENT,
        params=params,
        data=_NO_DATA,
        metric_policy="hessian-pd-term",
        metric_kind=KIND_ANALYTIC,
        reference_sampler=sampler,
    )


def make_hier_logistic(X, y, omega, theta, alpha=1.0):
    """Hierarchical Bayesian logistic regression over beta, conditional on precision alpha.

    The Gamma(omega, theta) prior on alpha is shape-scale; the analytic alpha
    update lives in gibbs_alpha_update.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if set(np.unique(y)) - {0.0, 1.0}:
        raise ValueError("labels must be in {0, 1}")
    if alpha <= 0:
        raise ValueError("alpha must be positive")
    n, m = X.shape
    data = np.column_stack([X, y])
    return TargetModel(
        name="hier_logistic",
        dim=m,
        tid=TID_LOGISTIC,
        params=np.array([float(alpha)]),
        data=data,
        metric_policy="fisher-plus-prior",
        metric_kind=KIND_ANALYTIC,
        gibbs=(float(omega), float(theta)),
    )


def logistic_with_alpha(target, alpha):
    """Copy of a logistic target with a new precision alpha (Gibbs companion)."""
    return dataclasses.replace(target, params=np.array([float(alpha)]))


def make_exp_metric_toy():
    """1-D flat density with metric G = [e^q]; analytic everything, for tests."""
    return TargetModel(
        name="exp_metric_toy",
        dim=1,
        tid=TID_EXPTOY,
        params=np.zeros(0),
        data=_NO_DATA,
        metric_policy="hessian-pd-term",
        metric_kind=KIND_ANALYTIC,
    )


# --------------------------------------------------------------------------
# logistic data and the analytic Gibbs step


@dataclass
class LogisticGibbsState:
    beta: np.ndarray
    alpha: float


def gibbs_alpha_posterior(beta, omega, theta):
    """(shape, rate) of alpha | beta under the Gamma(omega, theta) shape-scale prior."""
    beta = np.asarray(beta, dtype=float)
    return omega + beta.size / 2.0, 1.0 / theta + 0.5 * float(np.dot(beta, beta))


def gibbs_alpha_update(state, omega, theta, rng):
    """Draw alpha | beta ~ Gamma(shape = omega + m/2, rate = 1/theta + ||beta||^2/2)."""
    shape, rate = gibbs_alpha_posterior(state.beta, omega, theta)
    return float(rng.gamma(shape, 1.0 / rate))


def load_design_csv(path):
    """Design matrix + labels from a CSV with header row and label column "y"."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if "y" not in header:
            raise ValueError(f"no label column 'y' in {path}")
        ycol = header.index("y")
        rows = [[float(v) for v in row] for row in reader if row]
    M = np.asarray(rows, dtype=float)
    y = M[:, ycol]
    X = np.delete(M, ycol, axis=1)
    return X, y


def default_logistic_data():
    """The checked-in 270 x 14 synthetic logistic dataset."""
    path = resources.files("manifoldmc").joinpath("data/logistic.csv")
    return load_design_csv(str(path))
