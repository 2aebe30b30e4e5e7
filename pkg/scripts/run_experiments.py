#!/usr/bin/env python3
"""Run the six train/test protocols for both learners on a synthetic dataset.

Prints a sign-accuracy table (rows: experiments, columns: learners) and
optionally writes per-experiment ratio CSVs and accuracy JSON files.

    python3 scripts/run_experiments.py --seed 0 --noise 0.02 --out results/
"""

from __future__ import annotations

import argparse
import time
from pathlib import Path

from optadvisor.evaluation import (
    accuracy_summary,
    export_ratios_csv,
    generate_synthetic_dataset,
    run_experiment,
    protocol_spec,
    write_summary_json,
)

LEARNERS = ("ibk", "m5p")


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--noise", type=float, default=0.02)
    ap.add_argument("--k", type=int, default=10)
    ap.add_argument("--out", type=Path, help="directory for ratio CSVs and accuracy JSON")
    args = ap.parse_args()

    t0 = time.perf_counter()
    ds = generate_synthetic_dataset(seed=args.seed, noise_level=args.noise)
    print(f"dataset: seed={args.seed} noise={args.noise} records={len(ds.records)}")
    print(f"{'exp':>3}  {'train':>5}  " + "  ".join(f"{name:>7}" for name in LEARNERS))
    for exp in range(1, 7):
        spec = protocol_spec(exp, ds)
        cells = []
        n_train = None
        for learner in LEARNERS:
            outcomes = run_experiment(ds, spec, learner, args.k)
            summary = accuracy_summary(outcomes, exp, learner)
            cells.append(f"{summary['overall_percent']:6.1f}%")
            n_train = 64 * len(spec.training.runs)
            if args.out:
                args.out.mkdir(parents=True, exist_ok=True)
                export_ratios_csv(outcomes, args.out / f"exp{exp}_{learner}_ratios.csv")
                write_summary_json(summary, args.out / f"exp{exp}_{learner}_accuracy.json")
        print(f"{exp:>3}  {n_train:>5}  " + "  ".join(cells))
    print(f"elapsed: {time.perf_counter() - t0:.1f} s")


if __name__ == "__main__":
    main()
