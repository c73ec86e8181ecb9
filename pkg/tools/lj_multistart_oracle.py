"""Random-restart reference minima for small Lennard-Jones clusters.

Runs scipy's L-BFGS-B from 200 random starts per cluster size using a
self-contained energy function (no stericzip code), and records the best
energy found and how many starts reached it. The result is checked in as
tests/data/lj_multistart.json and read by the acceptance tests.

    python tools/lj_multistart_oracle.py
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
import scipy
from scipy.optimize import minimize
from scipy.spatial.distance import pdist

OUT = Path(__file__).resolve().parents[1] / "tests/data/lj_multistart.json"
STARTS = 200
SEED = 20240611
SIZES = (2, 3, 4)


def energy(x):
    r = pdist(x.reshape(-1, 3))
    s6 = r**-6
    return float(np.sum(4.0 * (s6 * s6 - s6)))


def gradient(x):
    p = x.reshape(-1, 3)
    diff = p[:, None, :] - p[None, :, :]
    r2 = np.sum(diff**2, axis=-1)
    np.fill_diagonal(r2, 1.0)
    inv6 = r2**-3
    coef = (-48.0 * inv6 * inv6 + 24.0 * inv6) / r2
    np.fill_diagonal(coef, 0.0)
    return np.sum(coef[:, :, None] * diff, axis=1).ravel()


def run(n, rng):
    side = max(1.5, 1.2 * n ** (1 / 3))
    finals = []
    for _ in range(STARTS):
        while True:
            x0 = rng.uniform(0.0, side, size=3 * n)
            if n < 2 or pdist(x0.reshape(-1, 3)).min() > 0.8:
                break
        res = minimize(energy, x0, jac=gradient, method="L-BFGS-B", options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 5000})
        finals.append(res.fun)
    finals = np.array(finals)
    best = float(finals.min())
    hits = int(np.sum(finals <= best + 1e-6))
    return {"starts": STARTS, "best_energy": best, "starts_at_best": hits}


def main() -> int:
    rng = np.random.default_rng(SEED)
    doc = {
        "generator": "tools/lj_multistart_oracle.py",
        "seed": SEED,
        "scipy": scipy.__version__,
        "clusters": {str(n): run(n, rng) for n in SIZES},
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(doc, indent=2) + "\n")
    print(json.dumps(doc["clusters"], indent=2))
    return 0


if __name__ == "__main__":
    sys.exit(main())
