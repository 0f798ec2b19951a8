"""Unregularised estimates split by true bond class, at several data lengths.

Prints, for each T, the mean of each true class and the mid-gap
classification error count; writes one ``fig_hist_J0.tsv`` per T.

    python3 scripts/coupling_histograms.py --T 2000 200 50
"""
import argparse
from pathlib import Path

import numpy as np

from kinising.config import ExperimentConfig
from kinising.evaluate import classify, confusion, midgap_threshold
from kinising.pipeline import run_pipeline


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--T", type=float, nargs="+", default=[2000.0, 200.0, 50.0])
    ap.add_argument("--out", type=Path, default=Path("results/histograms"))
    args = ap.parse_args()

    for T in args.T:
        cfg = ExperimentConfig().replace(simulation={"updates_per_spin": T}, path={"methods": []},
                                         output={"formats": ["tables"]})
        b = run_pipeline(cfg, args.out / f"T{T:g}")
        J, cls = b.start.couplings, b.truth.classes
        thr = midgap_threshold(J, b.truth.candidates)
        cm = confusion(b.truth, classify(J, thr))
        zero = J[(cls == 0) & b.truth.candidates]
        print(f"T={T:g}: mean(+)={J[cls == 1].mean():+.4f} mean(-)={J[cls == -1].mean():+.4f} "
              f"sd(0)={np.std(zero):.4f} mid-gap errors={cm.total_error}")


if __name__ == "__main__":
    main()
