#!/usr/bin/env python3
"""Loss versus communication for parallel SGD under different compressors.

Runs the same least-squares problem with full-precision gradients, a dense
multi-level quantizer, and the 1-level sparse quantizer, then emits one CSV
row per iteration per setting: how much loss each bit of communication buys.

    python3 scripts/convergence_vs_bits.py --seeds 5 -o tradeoff.csv
"""

import argparse
import csv
import math
import sys

import numpy as np

from qsgd import (
    QuantizerConfig,
    RunConfig,
    Scheme,
    TunedStep,
    make_least_squares,
    run_parallel_sgd,
)


def settings(n):
    root = math.isqrt(n)
    return {
        "full": None,
        f"dense_s{root}": QuantizerConfig(levels=root, bucket_size=n,
                                          scheme=Scheme.DENSE, seed=0),
        "sparse_s1": QuantizerConfig(levels=1, bucket_size=n,
                                     scheme=Scheme.SPARSE, seed=0),
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=128)
    ap.add_argument("--m", type=int, default=512)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--iters", type=int, default=400)
    ap.add_argument("--seeds", type=int, default=5, help="number of seeds to average")
    ap.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    args = ap.parse_args(argv)

    obj = make_least_squares(n=args.n, m=args.m, seed=0, realizable=True)
    rows = []
    for name, quantizer in settings(args.n).items():
        losses = np.zeros(args.iters)
        cumulative = np.zeros(args.iters)
        ratios = []
        for seed in range(args.seeds):
            cfg = RunConfig(K=args.workers, T=args.iters, minibatch=1,
                            eta=TunedStep(), quantizer=quantizer, seed=seed)
            metrics = run_parallel_sgd(obj, cfg)
            losses += np.asarray(metrics.losses)
            cumulative += np.asarray(metrics.cumulative_bits, dtype=np.float64)
            ratios.append(metrics.variance_ratio)
        losses /= args.seeds
        cumulative /= args.seeds
        for t in range(args.iters):
            rows.append({
                "setting": name,
                "iter": t + 1,
                "loss": f"{losses[t]:.6g}",
                "cumulative_bits": f"{cumulative[t]:.1f}",
            })
        print(f"{name}: final loss {losses[-1]:.4f}, "
              f"total {cumulative[-1]:.3e} bits, "
              f"variance ratio {np.mean(ratios):.3f}", file=sys.stderr)

    out = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.DictWriter(out, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    finally:
        if args.output:
            out.close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
