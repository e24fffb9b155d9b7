"""Experiment harness: configs, chain runs, trace/metrics files, MMD curves.

File formats
------------
trace.csv       ``# config:``/``# version:``/``# seed:`` comment lines, then a
                header ``step,branch,accept_prob,accepted,q0,...,q{m-1}`` and
                one row per transition (floats at 17 significant digits).
metrics.json    esjd, msjd, min_ess, min_ess_per_sec, acceptance_rate,
                branch_histogram, wall_time_sec.  Wall time covers the
                sampling loop only (monotonic clock), so it is the one
                nondeterministic field.
reference.csv   same comment lines, header ``q0,...,q{m-1}``.
curve.csv       comment lines plus ``# bandwidth:``, header ``step,mmd_u2_abs``.

Seeding: every random stream is ``chain_rng(base_seed, stream, index)`` with
fixed stream ids, so reruns are byte-identical apart from wall time.
"""

from __future__ import annotations

import dataclasses
import json
import os
import time
from dataclasses import dataclass, field

import numpy as np

from . import __version__, diagnostics, kernels, targets

STREAM_CHAIN = 0
STREAM_REFERENCE = 1
STREAM_PROJECTIONS = 2
STREAM_BANDWIDTH = 3

TARGET_IDS = ("gaussian", "banana", "funnel", "student_t", "hier_logistic", "exp_toy")
KERNEL_IDS = ("ehmc", "rmhmc", "lmc", "mala", "mmala", "smala", "lmrmhmc", "lmlmc")

_HMC_SCHEMES = {
    "ehmc": "euclidean",
    "rmhmc": "generalized",
    "lmc": "lagrangian",
    "lmrmhmc": "generalized",
    "lmlmc": "lagrangian",
}
_MIXTURE_KERNELS = ("lmrmhmc", "lmlmc")

# default 2-D correlated Gaussian for desk runs
_GAUSS_PRECISION = ((1.25, -0.5), (-0.5, 1.0))


class ConfigError(ValueError):
    """Invalid experiment configuration (CLI exit code 2)."""


class MissingReferenceSampler(ConfigError):
    """The chosen target has no exact sampler to draw a reference set from."""


class SchemaError(ConfigError):
    """A trace or reference file does not match the expected layout."""


def chain_rng(base_seed, stream, index):
    """Generator for (seed, stream, index); streams keep draws independent."""
    return np.random.default_rng(np.random.SeedSequence([int(base_seed), int(stream), int(index)]))


@dataclass
class ExperimentConfig:
    target: str
    kernel: str
    step_size: float
    n_steps: int
    base_seed: int = 0
    out_dir: str = "."
    target_params: dict = field(default_factory=dict)
    k_max: int = 5
    alpha1: float = 0.0
    langevin_variant: str = "mmala"
    langevin_step_size: float | None = None
    metric_policy: str = "default"
    n_chains: int = 512
    n_reference: int = 2000
    init_point: list | None = None
    bandwidth_flavor: str = "squared"
    gibbs_alpha: bool = False
    fp_tol: float = 1e-10
    fp_max_iters: int = 50

    @classmethod
    def from_dict(cls, d):
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - names)
        if unknown:
            raise ConfigError(f"unknown config fields: {', '.join(unknown)}")
        missing = sorted(
            {"target", "kernel", "step_size", "n_steps"} - set(d))
        if missing:
            raise ConfigError(f"missing config fields: {', '.join(missing)}")
        return cls(**d)

    def to_dict(self):
        return dataclasses.asdict(self)

    def config_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    def validate(self):
        if self.target not in TARGET_IDS:
            raise ConfigError(f"unknown target {self.target!r}; expected one of {TARGET_IDS}")
        if self.kernel not in KERNEL_IDS:
            raise ConfigError(f"unknown kernel {self.kernel!r}; expected one of {KERNEL_IDS}")
        if self.n_steps < 1:
            raise ConfigError("n_steps must be ≥ 1")
        if not self.step_size > 0:
            raise ConfigError("step_size must be positive")
        if self.langevin_step_size is not None and not self.langevin_step_size > 0:
            raise ConfigError("langevin_step_size must be positive")
        if self.base_seed < 0:
            raise ConfigError("base_seed must be a non-negative integer")
        if self.k_max < 2:
            raise ConfigError("k_max must be ≥ 2")
        if not 0.0 <= self.alpha1 <= 1.0:
            raise ConfigError("alpha1 must lie in [0, 1]")
        if self.langevin_variant not in ("mala", "mmala", "smala"):
            raise ConfigError(f"unknown langevin_variant {self.langevin_variant!r}")
        if self.metric_policy not in ("default", "identity"):
            raise ConfigError(f"unknown metric_policy {self.metric_policy!r}")
        if self.bandwidth_flavor not in ("squared", "unsquared"):
            raise ConfigError(f"unknown bandwidth_flavor {self.bandwidth_flavor!r}")
        if self.n_chains < 1:
            raise ConfigError("n_chains must be ≥ 1")
        if self.n_reference < 1:
            raise ConfigError("n_reference must be ≥ 1")
        if not self.fp_tol > 0:
            raise ConfigError("fp_tol must be positive")
        if self.fp_max_iters < 1:
            raise ConfigError("fp_max_iters must be ≥ 1")
        t = build_target(self)
        if self.init_point is not None and len(self.init_point) != t.dim:
            raise ConfigError(f"init_point has length {len(self.init_point)}, target dim is {t.dim}")
        needs_constant = self.kernel in ("ehmc", "mala") or (
            self.kernel in _MIXTURE_KERNELS and self.langevin_variant == "mala")
        if needs_constant and t.metric_kind != targets.KIND_CONSTANT:
            raise ConfigError(
                f"kernel {self.kernel!r} needs a constant metric on target "
                f"{self.target!r}; set metric_policy=\"identity\"")
        if self.gibbs_alpha and t.gibbs is None:
            raise ConfigError(f"gibbs_alpha is not available for target {self.target!r}")


def build_target(cfg):
    """Target for cfg, with desk default parameters and the metric policy applied."""
    p = dict(cfg.target_params)
    if cfg.target == "gaussian":
        t = targets.make_gaussian(np.asarray(p.pop("precision", _GAUSS_PRECISION), dtype=float))
    elif cfg.target == "banana":
        t = targets.make_banana(
            N=p.pop("N", 100), sigma_y=p.pop("sigma_y", 2.0),
            sigma_theta=p.pop("sigma_theta", 1.0), seed=p.pop("seed", 0))
    elif cfg.target == "funnel":
        t = targets.make_funnel(N=p.pop("N", 9), softabs_alpha=p.pop("softabs_alpha", 1e6))
    elif cfg.target == "student_t":
        t = targets.make_student_t(
            m=p.pop("m", 5), nu=p.pop("nu", 5.0),
            sigma_diag=np.asarray(p.pop("sigma_diag", (1.0, 1.0, 1.0, 1.0, 100.0)), dtype=float))
    elif cfg.target == "hier_logistic":
        if "design_csv" in p:
            X, y = targets.load_design_csv(p.pop("design_csv"))
        else:
            X, y = targets.default_logistic_data()
        t = targets.make_hier_logistic(
            X, y, omega=p.pop("omega", 10.0), theta=p.pop("theta", 2.0),
            alpha=p.pop("alpha", 1.0))
    elif cfg.target == "exp_toy":
        t = targets.make_exp_metric_toy()
    else:
        raise ConfigError(f"unknown target {cfg.target!r}; expected one of {TARGET_IDS}")
    if p:
        raise ConfigError(f"unknown target_params for {cfg.target!r}: {sorted(p)}")
    if cfg.metric_policy == "identity":
        t = targets.with_constant_metric(t, np.eye(t.dim))
    return t


def make_transition(cfg):
    """Transition callable (target, q, rng) -> KernelOutcome for cfg's kernel."""
    if cfg.kernel in ("mala", "mmala", "smala"):
        variant, eps = cfg.kernel, cfg.step_size

        def transition(target, q, rng):
            return kernels.langevin_transition(target, q, variant, eps, rng)

        return transition
    mix = kernels.MixtureSpec(
        alpha1=cfg.alpha1 if cfg.kernel in _MIXTURE_KERNELS else 0.0,
        k_max=cfg.k_max, step_size=cfg.step_size,
        langevin_variant=cfg.langevin_variant, scheme=_HMC_SCHEMES[cfg.kernel],
        langevin_step_size=cfg.langevin_step_size,
        fp_tol=cfg.fp_tol, fp_max_iters=cfg.fp_max_iters)

    def transition(target, q, rng):
        return kernels.mixture_transition(target, q, mix, rng)

    return transition


def initial_point(cfg, target):
    if cfg.init_point is not None:
        return np.asarray(cfg.init_point, dtype=float)
    return target.default_init()


# ---------------------------------------------------------------------------
# file IO


def _fmt(x):
    return f"{float(x):.17g}"


def _comment_lines(cfg):
    return [
        f"# config: {cfg.config_json()}",
        f"# version: {__version__}",
        f"# seed: {cfg.base_seed}",
    ]


def _write_lines(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class ChainTrace:
    config: dict
    version: str
    seed: int
    steps: np.ndarray
    branches: np.ndarray
    accept_probs: np.ndarray
    accepted: np.ndarray
    positions: np.ndarray


def read_trace(path):
    config, version, seed = {}, "", 0
    header, rows = None, []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("# config: "):
                config = json.loads(line[len("# config: "):])
            elif line.startswith("# version: "):
                version = line[len("# version: "):]
            elif line.startswith("# seed: "):
                seed = int(line[len("# seed: "):])
            elif line.startswith("#"):
                continue
            elif header is None:
                header = line.split(",")
            else:
                rows.append(line.split(","))
    if header is None or header[:4] != ["step", "branch", "accept_prob", "accepted"]:
        raise SchemaError(f"{path}: trace header must start with step,branch,accept_prob,accepted")
    qcols = header[4:]
    if not qcols or qcols != [f"q{i}" for i in range(len(qcols))]:
        raise SchemaError(f"{path}: position columns must be q0..q{{m-1}}")
    if not rows:
        raise SchemaError(f"{path}: trace has no records")
    M = np.array([[float(v) for v in r] for r in rows])
    if M.shape[1] != len(header):
        raise SchemaError(f"{path}: row width does not match header")
    return ChainTrace(
        config=config, version=version, seed=seed,
        steps=M[:, 0].astype(int), branches=M[:, 1].astype(int),
        accept_probs=M[:, 2], accepted=M[:, 3].astype(int),
        positions=M[:, 4:])


def read_reference(path):
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line or line.startswith("#") or line.startswith("q0"):
                continue
            rows.append([float(v) for v in line.split(",")])
    if not rows:
        raise SchemaError(f"{path}: reference has no records")
    return np.array(rows)


# ---------------------------------------------------------------------------
# commands


def _branch_histogram(branches):
    values, counts = np.unique(np.asarray(branches, dtype=int), return_counts=True)
    return {str(int(v)): int(c) for v, c in zip(values, counts)}


def run_chain(cfg):
    """Run one chain; write trace.csv and metrics.json under cfg.out_dir."""
    cfg.validate()
    target = build_target(cfg)
    transition = make_transition(cfg)
    rng = chain_rng(cfg.base_seed, STREAM_CHAIN, 0)
    q = initial_point(cfg, target)
    alpha = float(target.params[0]) if cfg.gibbs_alpha else 0.0
    outcomes = []
    start = time.perf_counter()
    for _ in range(cfg.n_steps):
        out = transition(target, q, rng)
        q = out.next
        if cfg.gibbs_alpha:
            omega, theta = target.gibbs
            alpha = targets.gibbs_alpha_update(
                targets.LogisticGibbsState(beta=q, alpha=alpha), omega, theta, rng)
            target = targets.logistic_with_alpha(target, alpha)
        outcomes.append(out)
    wall = time.perf_counter() - start

    os.makedirs(cfg.out_dir, exist_ok=True)
    m = target.dim
    lines = _comment_lines(cfg)
    lines.append("step,branch,accept_prob,accepted," + ",".join(f"q{i}" for i in range(m)))
    for i, out in enumerate(outcomes):
        lines.append(",".join(
            [str(i + 1), str(out.branch), _fmt(out.accept_prob), str(int(out.accepted))]
            + [_fmt(v) for v in out.next]))
    trace_path = os.path.join(cfg.out_dir, "trace.csv")
    _write_lines(trace_path, lines)

    positions = np.array([out.next for out in outcomes])
    ess = diagnostics.split_chain_ess(positions)
    metrics = {
        "esjd": diagnostics.esjd(outcomes),
        "msjd": diagnostics.msjd(outcomes),
        "min_ess": float(ess.min_ess),
        "min_ess_per_sec": float(ess.min_ess) / wall,
        "acceptance_rate": float(np.mean([out.accepted for out in outcomes])),
        "branch_histogram": _branch_histogram([out.branch for out in outcomes]),
        "wall_time_sec": wall,
    }
    metrics_path = os.path.join(cfg.out_dir, "metrics.json")
    with open(metrics_path, "w") as fh:
        json.dump(metrics, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return {"trace_path": trace_path, "metrics_path": metrics_path, "metrics": metrics}


def _reference_set(cfg, target):
    if target.reference_sampler is None:
        raise MissingReferenceSampler(f"target {cfg.target!r} has no reference sampler")
    return target.reference_sampler(chain_rng(cfg.base_seed, STREAM_REFERENCE, 0), cfg.n_reference)


def write_reference(cfg):
    """Draw cfg.n_reference exact samples and write reference.csv; returns the path."""
    cfg.validate()
    target = build_target(cfg)
    X = _reference_set(cfg, target)
    os.makedirs(cfg.out_dir, exist_ok=True)
    lines = _comment_lines(cfg)
    lines.append(",".join(f"q{i}" for i in range(target.dim)))
    lines.extend(",".join(_fmt(v) for v in row) for row in X)
    path = os.path.join(cfg.out_dir, "reference.csv")
    _write_lines(path, lines)
    return path


def mmd_curve(cfg, transition_override=None, init_states=None):
    """Ensemble MMD-to-reference per step; writes curve.csv.

    transition_override and init_states are testing seams: the override is
    called like a transition and may return a bare position array.
    """
    cfg.validate()
    if cfg.n_chains < 2:
        raise ConfigError("n_chains must be ≥ 2 for an MMD curve")
    if cfg.n_reference < 2:
        raise ConfigError("n_reference must be ≥ 2 for an MMD curve")
    target = build_target(cfg)
    ref = _reference_set(cfg, target)
    # bandwidth fixed once, from the reference set alone
    h = diagnostics.median_bandwidth(
        ref, flavor=cfg.bandwidth_flavor,
        rng=chain_rng(cfg.base_seed, STREAM_BANDWIDTH, 0))
    transition = transition_override if transition_override is not None else make_transition(cfg)

    if init_states is not None:
        Q = np.array(init_states, dtype=float)
        if Q.shape != (cfg.n_chains, target.dim):
            raise ConfigError(f"init_states must have shape ({cfg.n_chains}, {target.dim})")
    else:
        Q = np.tile(initial_point(cfg, target), (cfg.n_chains, 1))
    rngs = [chain_rng(cfg.base_seed, STREAM_CHAIN, i) for i in range(cfg.n_chains)]

    values = np.empty(cfg.n_steps)
    for step in range(cfg.n_steps):
        for i in range(cfg.n_chains):
            out = transition(target, Q[i], rngs[i])
            Q[i] = out.next if isinstance(out, kernels.KernelOutcome) else np.asarray(out, dtype=float)
        values[step] = diagnostics.mmd_unbiased(Q, ref, h)

    steps = np.arange(1, cfg.n_steps + 1)
    slope, r2 = _log_slope(steps, values)
    os.makedirs(cfg.out_dir, exist_ok=True)
    lines = _comment_lines(cfg)
    lines.append(f"# bandwidth: {_fmt(h)}")
    lines.append("step,mmd_u2_abs")
    lines.extend(f"{s},{_fmt(abs(v))}" for s, v in zip(steps, values))
    path = os.path.join(cfg.out_dir, "curve.csv")
    _write_lines(path, lines)
    return {
        "curve_path": path, "steps": steps, "values": values,
        "bandwidth": float(h), "log_slope": slope, "log_r2": r2,
    }


def _log_slope(steps, values):
    """Least-squares slope and R^2 of log(values) vs step, positive values only."""
    mask = values > 0
    if mask.sum() < 2:
        return float("nan"), float("nan")
    x = steps[mask].astype(float)
    y = np.log(values[mask])
    A = np.column_stack([x, np.ones_like(x)])
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(coef[0]), r2


def diagnose(trace_paths, reference_path=None, n_proj=100, seed=0):
    """Per-trace split-chain ESS and rates, plus KS projections vs a reference."""
    if not trace_paths:
        raise ConfigError("diagnose needs at least one trace")
    traces = [read_trace(p) for p in trace_paths]
    dims = {t.positions.shape[1] for t in traces}
    if len(dims) > 1:
        raise SchemaError(f"traces have mismatched dimensions {sorted(dims)}")
    entries = []
    for path, t in zip(trace_paths, traces):
        ess = diagnostics.split_chain_ess(t.positions)
        entries.append({
            "path": str(path),
            "min_ess": float(ess.min_ess),
            "acceptance_rate": float(np.mean(t.accepted)),
            "branch_histogram": _branch_histogram(t.branches),
        })
    report = {"traces": entries}
    if reference_path is not None:
        ref = read_reference(reference_path)
        if ref.shape[1] != dims.pop():
            raise SchemaError(
                f"reference dimension {ref.shape[1]} does not match trace dimension")
        pooled = np.vstack([t.positions for t in traces])
        stats = diagnostics.ks_random_projections(
            pooled, ref, n_proj, chain_rng(seed, STREAM_PROJECTIONS, 0))
        report["ks"] = {
            "statistics": [float(s) for s in stats],
            "mean": float(stats.mean()),
            "max": float(stats.max()),
        }
    return report
