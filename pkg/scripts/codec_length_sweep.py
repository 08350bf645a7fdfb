#!/usr/bin/env python3
"""Sweep encoded message lengths against the closed-form budget.

For every (scheme, n, s) cell, quantizes and encodes Gaussian vectors and
reports the measured mean/max bits, the mean nonzero count, and the
theoretical length bound (blank where the bound does not apply).

    python3 scripts/codec_length_sweep.py --trials 200 -o lengths.csv
"""

import argparse
import csv
import math
import sys

import numpy as np

from qsgd import QuantizerConfig, Scheme, encode, quantize, substream, theoretical_length_bound


def sweep_cell(scheme, n, s, trials, seed):
    cfg = QuantizerConfig(levels=s, bucket_size=n, scheme=scheme, seed=seed)
    data_rng = substream(seed, "data", scheme.value, n, s)
    quant_rng = substream(seed, "quant", scheme.value, n, s)
    bits, nnz = [], []
    for _ in range(trials):
        q = quantize(data_rng.standard_normal(n), cfg, rng=quant_rng)
        bits.append(encode(q).declared_bits)
        nnz.append(sum(int(np.count_nonzero(b.levels)) for b in q.buckets))
    return {
        "scheme": scheme.value,
        "n": n,
        "s": s,
        "mean_bits": f"{np.mean(bits):.1f}",
        "max_bits": max(bits),
        "mean_nonzeros": f"{np.mean(nnz):.1f}",
        "bound_bits": _fmt_bound(n, s, scheme),
        "plain_bits": 32 * n,
    }


def _fmt_bound(n, s, scheme):
    bound = theoretical_length_bound(n, s, scheme)
    return "" if bound is None else f"{bound:.1f}"


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=200)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--sizes", type=int, nargs="+", default=[256, 1024, 10_000])
    ap.add_argument("--levels", type=int, nargs="+", default=[1, 2, 4])
    ap.add_argument("-o", "--output", default=None, help="CSV path (default: stdout)")
    args = ap.parse_args(argv)

    rows = []
    for scheme in (Scheme.SPARSE, Scheme.DENSE):
        for n in args.sizes:
            for s in args.levels:
                rows.append(sweep_cell(scheme, n, s, args.trials, args.seed))
                print(f"done {rows[-1]['scheme']} n={n} s={s}: "
                      f"mean {rows[-1]['mean_bits']} bits", file=sys.stderr)

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
