"""Weak-coupling check: how closely approximate pruning orders follow |J0|.

    python3 scripts/weak_coupling.py --g 0.05 --T 200 2000
"""
import argparse

import numpy as np
from scipy.stats import spearmanr

from kinising.config import ExperimentConfig
from kinising.evaluate import BondTruth
from kinising.pipeline import realize
from kinising.regpath import run_method


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--g", type=float, default=0.05)
    ap.add_argument("--T", type=float, nargs="+", default=[200.0])
    ap.add_argument("--replicates", type=int, default=3)
    args = ap.parse_args()

    for T in args.T:
        cfg = ExperimentConfig().replace(network={"coupling_scale": args.g},
                                         simulation={"updates_per_spin": T, "n_steps": None})
        grid = np.r_[cfg.path.lambda_grid(), np.geomspace(65.0, 100.0 * T, 20)]
        rho = {m: [] for m in ("approx1", "approx2", "approx3")}
        for r in range(args.replicates):
            params, history, start = realize(cfg, r)
            cand = BondTruth.from_params(params).candidates
            for m in rho:
                path = run_method(m, history, start, grid)
                rho[m].append(spearmanr(path.prune_lambdas()[cand], np.abs(start.couplings)[cand]).statistic)
        print(f"T={T:g}: " + ", ".join(f"{m} {np.mean(v):.4f}" for m, v in rho.items()))


if __name__ == "__main__":
    main()
