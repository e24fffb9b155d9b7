"""Wall-time comparison of the numba path against the MANIFOLDMC_NO_JIT fallback.

Each workload runs in a fresh subprocess (the flag is read at import time) and
is timed around the sampling loop only, after a short warm-up chain so numba
compilation does not pollute the numbers.  Run from the repository root:

    python scripts/benchmark_jit.py [--steps 2000]
"""

import argparse
import json
import os
import subprocess
import sys
import tempfile

WORKLOADS = [
    ("rmhmc banana m=2", dict(target="banana", kernel="rmhmc", step_size=0.08, k_max=5)),
    ("lmc student_t m=5", dict(target="student_t", kernel="lmc", step_size=0.2, k_max=5)),
    ("lmrmhmc student_t m=5", dict(target="student_t", kernel="lmrmhmc", alpha1=0.3,
                                   step_size=0.2, k_max=5, langevin_variant="smala")),
    ("smala logistic m=14", dict(target="hier_logistic", kernel="smala", step_size=0.15)),
]

_PROBE = r"""
import json, sys
from manifoldmc.harness import ExperimentConfig, run_chain

cfg = json.loads(sys.argv[1])
warm = ExperimentConfig.from_dict({**cfg, "n_steps": 16})
run_chain(warm)
res = run_chain(ExperimentConfig.from_dict(cfg))
print(json.dumps(res["metrics"]["wall_time_sec"]))
"""


def time_workload(case, n_steps, no_jit, out_dir):
    cfg = dict(case, n_steps=n_steps, base_seed=0, out_dir=out_dir)
    env = dict(os.environ, MANIFOLDMC_NO_JIT="1" if no_jit else "0")
    proc = subprocess.run(
        [sys.executable, "-c", _PROBE, json.dumps(cfg)],
        capture_output=True, text=True, env=env,
    )
    if proc.returncode != 0:
        sys.stderr.write(proc.stderr)
        raise SystemExit(1)
    return float(proc.stdout.strip().splitlines()[-1])


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=2000)
    args = parser.parse_args()
    print(f"{'workload':28s} {'jit (s)':>10s} {'no-jit (s)':>12s} {'speedup':>9s}")
    with tempfile.TemporaryDirectory() as tmp:
        for name, case in WORKLOADS:
            t_jit = time_workload(case, args.steps, False, os.path.join(tmp, "a"))
            t_plain = time_workload(case, args.steps, True, os.path.join(tmp, "b"))
            print(f"{name:28s} {t_jit:10.3f} {t_plain:12.3f} {t_plain / t_jit:8.1f}x")


if __name__ == "__main__":
    main()
