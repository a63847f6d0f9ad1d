#!/usr/bin/env python3
"""Generate a sparse synthetic regression dataset in libsvm format.

Rows are unit-norm sparse vectors; labels are a sparse linear signal plus
Gaussian noise. Useful for exercising the benchmark harness when no real
libsvm files are on hand.

Example:
    python3 scripts/make_synthetic_libsvm.py --n 12000 --d 123 \
        --seed 20260824 --out data/standin
    python3 scripts/make_synthetic_libsvm.py --n 2000 --d 123 \
        --seed 20260825 --out data/standin.t
"""

import argparse

import numpy as np


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, required=True, help="number of rows")
    ap.add_argument("--d", type=int, default=123, help="feature dimension")
    ap.add_argument("--nnz-signal", type=int, default=12,
                    help="nonzero coordinates in the true weight vector")
    ap.add_argument("--signal-l1", type=float, default=0.9,
                    help="l1 norm of the true weight vector")
    ap.add_argument("--label-noise", type=float, default=0.5,
                    help="std of Gaussian label noise")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--out", required=True, help="output path")
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    w = np.zeros(args.d)
    nz = rng.choice(args.d, size=args.nnz_signal, replace=False)
    w[nz] = rng.normal(0, 1.0, args.nnz_signal)
    w *= args.signal_l1 / np.sum(np.abs(w))

    with open(args.out, "w") as fh:
        for _ in range(args.n):
            k = int(rng.integers(8, 20))
            idx = np.sort(rng.choice(args.d, size=k, replace=False))
            vals = rng.normal(0, 1.0, k)
            vals /= np.linalg.norm(vals)
            x = np.zeros(args.d)
            x[idx] = vals
            label = float(x @ w + args.label_noise * rng.normal())
            toks = [f"{label:.6f}"] + [f"{i + 1}:{v:.6f}"
                                       for i, v in zip(idx, vals)]
            fh.write(" ".join(toks) + "\n")
    print(f"wrote {args.n} rows (d={args.d}) to {args.out}")


if __name__ == "__main__":
    main()
