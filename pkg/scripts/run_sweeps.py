#!/usr/bin/env python3
"""Run the standard benchmark sweeps and write one CSV per sweep.

Two protocols are provided:
  * an n-sweep: the privacy budget follows the built-in rules
    delta = n^-1.1, epsilon = 4 sqrt(ln(1/delta));
  * an epsilon-sweep at fixed n.

Example (synthetic problem, no data files needed):
    python3 scripts/run_sweeps.py --problem synthetic_tnc \
        --algos phased_sgd psa --out-dir results/

Example (libsvm regression):
    python3 scripts/run_sweeps.py --problem linreg_l1 \
        --train data/a9a --test data/a9a.t \
        --algos phased_sgd iterated_phased_sgd:1.5 --out-dir results/
"""

import argparse
import os

from dpsco.bench import ExperimentConfig, emit, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problem", required=True,
                    choices=["linreg_l1", "logreg_l2", "synthetic_tnc"])
    ap.add_argument("--algos", nargs="+", required=True,
                    help="algorithm ids, e.g. phased_sgd psa "
                         "iterated_phased_sgd:1.5")
    ap.add_argument("--train", default=None, help="libsvm training file")
    ap.add_argument("--test", default=None, help="libsvm test file")
    ap.add_argument("--n-values", type=int, nargs="+",
                    default=[1024, 2048, 4096, 8192, 16384])
    ap.add_argument("--eps-values", type=float, nargs="+",
                    default=[0.5, 1.0, 2.0, 4.0, 8.0])
    ap.add_argument("--fixed-n", type=int, default=8192,
                    help="sample size used for the epsilon sweep")
    ap.add_argument("--seeds", type=int, default=20)
    ap.add_argument("--master-seed", type=int, default=0)
    ap.add_argument("--B", type=float, default=1.0,
                    help="radius of the feasible set")
    ap.add_argument("--skip-eps-sweep", action="store_true")
    ap.add_argument("--out-dir", default="results")
    args = ap.parse_args()

    os.makedirs(args.out_dir, exist_ok=True)
    common = dict(problem=args.problem, algorithms=args.algos,
                  seeds=args.seeds, master_seed=args.master_seed,
                  train_path=args.train, test_path=args.test, B=args.B)

    sweeps = [("n", ExperimentConfig(sweep_kind="n",
                                     sweep_values=args.n_values, **common))]
    if not args.skip_eps_sweep:
        sweeps.append(("epsilon",
                       ExperimentConfig(sweep_kind="epsilon",
                                        sweep_values=args.eps_values,
                                        fixed_n=args.fixed_n, **common)))
    for name, cfg in sweeps:
        table = run_experiment(cfg)
        out = os.path.join(args.out_dir, f"{args.problem}_{name}_sweep.csv")
        emit(table, "csv", out)
        print(f"{name}-sweep: {len(table.rows)} rows "
              f"({table.n_failed_cells} failed cells) -> {out}")


if __name__ == "__main__":
    main()
