"""Generate the checked-in synthetic logistic-regression dataset (270 x 14).

Fixed seed; column x0 is an intercept, x1..x13 are standard normal, label
column is y.  Run from the repository root:

    python scripts/make_logistic_data.py
"""

from pathlib import Path

import numpy as np

OUT = Path(__file__).resolve().parent.parent / "src" / "manifoldmc" / "data" / "logistic.csv"

N, M = 270, 14

rng = np.random.default_rng(1860)
X = np.ones((N, M))
X[:, 1:] = rng.normal(size=(N, M - 1))
beta_true = rng.normal(scale=0.5, size=M)
probs = 1.0 / (1.0 + np.exp(-X @ beta_true))
y = (rng.random(N) < probs).astype(int)

OUT.parent.mkdir(parents=True, exist_ok=True)
header = ",".join([f"x{j}" for j in range(M)] + ["y"])
with OUT.open("w") as fh:
    fh.write(header + "\n")
    for i in range(N):
        row = [f"{X[i, j]:.17g}" for j in range(M)] + [str(y[i])]
        fh.write(",".join(row) + "\n")
print(f"wrote {OUT} ({N} rows, {M} features)")
