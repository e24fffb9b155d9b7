"""Convergence and efficiency metrics.

Unbiased MMD^2 with a squared-exponential kernel, the median bandwidth
heuristic, expected/median squared jump distance, split-chain ESS via the
pooled autocorrelation estimator, and random-projection two-sample KS.
All estimators are plain vectorized numpy over immutable sample arrays.
"""

from dataclasses import dataclass

import numpy as np
from scipy import stats as _sstats

SUBSAMPLE_LIMIT = 4096


class DegenerateSet(Exception):
    """All pairwise distances vanish; no usable bandwidth."""


class ZeroVariance(Exception):
    """A parameter is constant across the chains."""


def _rows(X):
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError("need an (n, m) sample matrix with n >= 2")
    return X


def median_bandwidth(X, flavor="squared", rng=None):
    """Median pairwise distance heuristic.

    flavor "squared" (default) returns the median squared Euclidean
    distance, so exp(-d^2/2h) has a unit-order exponent at the median;
    "unsquared" returns the median distance itself.  Exact for
    n <= 4096, otherwise computed over a seeded subsample of that size.
    """
    if flavor not in ("squared", "unsquared"):
        raise ValueError(f"unknown bandwidth flavor {flavor!r}")
    X = _rows(X)
    if X.shape[0] > SUBSAMPLE_LIMIT:
        if rng is None:
            rng = np.random.default_rng(0)
        X = X[rng.choice(X.shape[0], size=SUBSAMPLE_LIMIT, replace=False)]
    sq = np.sum((X[:, None, :] - X[None, :, :]) ** 2, axis=-1)
    pairs = sq[np.triu_indices(X.shape[0], k=1)]
    h = float(np.median(pairs if flavor == "squared" else np.sqrt(pairs)))
    if h == 0.0:
        raise DegenerateSet("median pairwise distance is zero")
    return h


def mmd_unbiased(X, Y, h):
    """Three-term unbiased MMD^2 estimator with kernel exp(-d^2/2h).

    Diagonals are excluded from the two within-set terms, so the value can
    be negative; under X ~ Y it is centered at zero.
    """
    X, Y = _rows(X), _rows(Y)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    r, s = X.shape[0], Y.shape[0]

    def gram(A, B):
        d2 = np.sum((A[:, None, :] - B[None, :, :]) ** 2, axis=-1)
        return np.exp(-d2 / (2.0 * h))

    kxx = gram(X, X)
    kyy = gram(Y, Y)
    kxy = gram(X, Y)
    term_x = (kxx.sum() - np.trace(kxx)) / (r * (r - 1))
    term_y = (kyy.sum() - np.trace(kyy)) / (s * (s - 1))
    return float(term_x + term_y - 2.0 * kxy.sum() / (r * s))


def esjd(outcomes):
    """Expected squared jump distance: mean of alpha * ||proposal - q||^2."""
    if len(outcomes) == 0:
        raise ValueError("need at least one outcome")
    return float(np.mean([o.sq_jump for o in outcomes]))


def msjd(outcomes):
    """Median squared jump distance, lower median for even counts."""
    if len(outcomes) == 0:
        raise ValueError("need at least one outcome")
    jumps = np.sort([o.sq_jump for o in outcomes])
    return float(jumps[(len(jumps) + 1) // 2 - 1])


@dataclass
class EssReport:
    per_parameter_ess: np.ndarray
    min_ess: float
    tau_hat: np.ndarray
    truncation_lag: np.ndarray


def _autocov_biased(x):
    """Autocovariances (1/n) sum (x_i - xbar)(x_{i+t} - xbar), t = 0..n-1, via FFT."""
    n = x.shape[0]
    xc = x - x.mean()
    nfft = 1 << (2 * n - 1).bit_length()
    f = np.fft.rfft(xc, nfft)
    acov = np.fft.irfft(f * np.conj(f), nfft)[:n]
    return acov / n


def ess(chains):
    """Effective sample size from p chains of n steps and m parameters.

    rho_t pools within-chain autocovariances against the combined variance
    var+ = ((n-1) W + B)/n; tau = -1 + 2 sum of the initial positive
    Geyer pairs (rho_2k + rho_2k+1); ESS = pn/tau.
    """
    chains = np.asarray(chains, dtype=float)
    if chains.ndim == 2:
        chains = chains[:, :, None]
    if chains.ndim != 3 or chains.shape[0] < 2:
        raise ValueError("need (p, n, m) chains with p >= 2")
    p, n, m = chains.shape
    if n < 8:
        raise ValueError("chains too short for an autocorrelation estimate")

    per_ess = np.empty(m)
    taus = np.empty(m)
    lags = np.empty(m, dtype=int)
    for j in range(m):
        xs = chains[:, :, j]
        W = xs.var(axis=1, ddof=1).mean()
        B = n * xs.mean(axis=1).var(ddof=1)
        var_plus = ((n - 1) * W + B) / n
        if var_plus == 0.0:
            raise ZeroVariance(f"parameter {j} is constant across the chains")
        acov = np.mean([_autocov_biased(xs[c]) for c in range(p)], axis=0)
        rho = 1.0 - (W - acov) / var_plus
        # pair 0 is always kept; r is the last pair before the first
        # nonpositive one
        n_pairs = (n - 1) // 2
        tau = -1.0 + 2.0 * (rho[0] + rho[1])
        r = 0
        for k in range(1, n_pairs):
            pair = rho[2 * k] + rho[2 * k + 1]
            if pair <= 0.0:
                break
            tau += 2.0 * pair
            r = k
        per_ess[j] = p * n / tau
        taus[j] = tau
        lags[j] = r
    return EssReport(
        per_parameter_ess=per_ess, min_ess=float(per_ess.min()),
        tau_hat=taus, truncation_lag=lags,
    )


def split_chain_ess(samples):
    """ESS of a single chain split in half; odd lengths drop the middle row."""
    samples = np.asarray(samples, dtype=float)
    if samples.ndim == 1:
        samples = samples[:, None]
    n = samples.shape[0]
    half = n // 2
    return ess(np.stack([samples[:half], samples[n - half:]]))


def ks_random_projections(X, Y, n_proj, rng):
    """Two-sample KS statistics of n_proj random unit-vector projections."""
    X, Y = _rows(X), _rows(Y)
    if X.shape[1] != Y.shape[1]:
        raise ValueError("sample sets have different dimensions")
    if n_proj < 1:
        raise ValueError("n_proj must be a positive integer")
    out = np.empty(n_proj)
    for i in range(n_proj):
        u = rng.normal(size=X.shape[1])
        u /= np.linalg.norm(u)
        out[i] = _sstats.ks_2samp(X @ u, Y @ u).statistic
    return out
